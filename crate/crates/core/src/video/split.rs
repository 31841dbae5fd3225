use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train / validation / test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const P80: SplitRatios = SplitRatios { train: 0.8, val: 0.1, test: 0.1 };
    pub const P90: SplitRatios = SplitRatios { train: 0.9, val: 0.05, test: 0.05 };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios {}/{}/{} must lie in [0, 1] and sum to 1",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios::P80
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.val, self.test)
    }
}

/// Accepts the preset names `80` and `90` or an explicit `train/val/test`.
impl FromStr for SplitRatios {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let r = match s.trim() {
            "80" | "80/10/10" => SplitRatios::P80,
            "90" | "90/5/5" => SplitRatios::P90,
            other => {
                let parts: Vec<f64> = other
                    .split('/')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("bad split '{other}'")))?;
                if parts.len() != 3 {
                    return Err(Error::Config(format!("split '{other}' needs three parts")));
                }
                let scale = if parts.iter().sum::<f64>() > 1.5 { 100.0 } else { 1.0 };
                SplitRatios { train: parts[0] / scale, val: parts[1] / scale, test: parts[2] / scale }
            }
        };
        r.validate()?;
        Ok(r)
    }
}

/// Item indices of each partition, ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn floor_count(n: usize, ratio: f64) -> usize {
    // The epsilon keeps products such as 0.29 * 100 from flooring to 28.
    (n as f64 * ratio + 1e-9).floor() as usize
}

/// Distributes `total` held-out items over classes: each class gets the
/// floor of its quota, then leftovers go by largest fractional remainder,
/// ties to the class with fewer items already held out, then to the lower
/// class index.
fn apportion(sizes: &[usize], ratio: f64, total: usize, held: &[usize]) -> Vec<usize> {
    let quotas: Vec<f64> = sizes.iter().map(|&n| n as f64 * ratio).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
        rb.partial_cmp(&ra).unwrap().then(held[a].cmp(&held[b])).then(a.cmp(&b))
    });
    let mut missing = total.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if missing == 0 {
            break;
        }
        if counts[c] + held[c] < sizes[c] {
            counts[c] += 1;
            missing -= 1;
        }
    }
    counts
}

/// Seeded, per-class stratified partition of items labeled `labels`.
///
/// Validation and test sizes are `floor(N * ratio)` over the whole set and
/// the remainder goes to training. Every class in `class_names` must occur.
pub fn split_dataset(labels: &[usize], class_names: &[String], ratios: SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let k = class_names.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::Index(format!("item {i} has label {l} but only {k} classes are named")));
        }
        members[l].push(i);
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(class_names[c].clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in &mut members {
        m.shuffle(&mut rng);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let n = labels.len();
    let val = apportion(&sizes, ratios.val, floor_count(n, ratios.val), &vec![0; k]);
    let test = apportion(&sizes, ratios.test, floor_count(n, ratios.test), &val);

    let mut split = Split::default();
    for (c, m) in members.iter().enumerate() {
        split.val.extend_from_slice(&m[..val[c]]);
        split.test.extend_from_slice(&m[val[c]..val[c] + test[c]]);
        split.train.extend_from_slice(&m[val[c] + test[c]..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
