use serde::{Deserialize, Serialize};

use super::Mask;
use crate::geometry::BBox;

/// A connected foreground blob with its tight bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    /// Number of foreground pixels in the component.
    pub area: usize,
    pub frame: usize,
}

impl Detection {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.w as f64, self.h as f64)
    }
}

/// 8-connected components of `mask` with at least `min_area` pixels, in
/// raster order of their first pixel. `frame` is left at 0.
pub fn connected_components(mask: &Mask, min_area: usize) -> Vec<Detection> {
    let (h, w) = (mask.height, mask.width);
    let mut seen = vec![false; h * w];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..h * w {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0;
        while let Some(p) = stack.pop() {
            let (y, x) = (p / w, p % w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let q = ny * w + nx;
                    if mask.data[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if area >= min_area {
            out.push(Detection { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1, area, frame: 0 });
        }
    }
    out
}
