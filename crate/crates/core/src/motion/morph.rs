use std::str::FromStr;

use super::Mask;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphOp {
    /// Erode then dilate: removes specks.
    Open,
    /// Dilate then erode: fills pinholes.
    Close,
}

impl FromStr for MorphOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(MorphOp::Open),
            "close" => Ok(MorphOp::Close),
            o => Err(Error::Config(format!("unknown morphology '{o}'"))),
        }
    }
}

/// One separable pass of a `(2r+1)`-wide window along rows or columns.
/// Erosion keeps a pixel when every in-bounds neighbour is set; dilation
/// sets it when any is. Positions outside the image are ignored.
fn pass(mask: &Mask, r: usize, horizontal: bool, erode: bool) -> Mask {
    let (h, w) = (mask.height, mask.width);
    let mut out = Mask::empty(h, w);
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let idx = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + usize::from(mask.data[idx(line, i)]);
        }
        for i in 0..len {
            let (lo, hi) = (i.saturating_sub(r), (i + r + 1).min(len));
            let set = prefix[hi] - prefix[lo];
            out.data[idx(line, i)] = if erode { set == hi - lo } else { set > 0 };
        }
    }
    out
}

pub fn erode(mask: &Mask, radius: usize) -> Mask {
    pass(&pass(mask, radius, true, true), radius, false, true)
}

pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    pass(&pass(mask, radius, true, false), radius, false, false)
}

pub fn open(mask: &Mask, radius: usize) -> Mask {
    dilate(&erode(mask, radius), radius)
}

pub fn close(mask: &Mask, radius: usize) -> Mask {
    erode(&dilate(mask, radius), radius)
}

/// Square structuring element of side `2 * radius + 1`; radius 0 is the identity.
pub fn morph(mask: &Mask, op: MorphOp, radius: usize) -> Mask {
    match op {
        MorphOp::Open => open(mask, radius),
        MorphOp::Close => close(mask, radius),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(h: usize, w: usize, y0: usize, x0: usize, side: usize) -> Mask {
        let mut m = Mask::empty(h, w);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                m.set(y, x, true);
            }
        }
        m
    }

    #[test]
    fn open_removes_specks_but_keeps_blocks() {
        let mut m = square(12, 12, 2, 2, 5);
        m.set(10, 10, true);
        let o = open(&m, 1);
        assert!(!o.get(10, 10));
        assert_eq!(o, square(12, 12, 2, 2, 5));
    }

    #[test]
    fn close_fills_a_pinhole() {
        let mut m = square(9, 9, 2, 2, 5);
        m.set(4, 4, false);
        assert_eq!(close(&m, 1), square(9, 9, 2, 2, 5));
    }

    #[test]
    fn empty_stays_empty() {
        let m = Mask::empty(5, 7);
        assert_eq!(morph(&m, MorphOp::Open, 2), m);
        assert_eq!(morph(&m, MorphOp::Close, 2), m);
    }

    #[test]
    fn border_pixels_survive_erosion_when_their_neighbourhood_is_full() {
        let full = square(4, 4, 0, 0, 4);
        assert_eq!(erode(&full, 1), full);
    }
}
