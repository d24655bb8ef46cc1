//! Depth-indexed cache of M-matrix secondary diagonals.
//!
//! The diagonal cubes only depend on how many distinct features a path has,
//! not on which features they are, so one vector per `(k, target)` serves
//! every leaf with `k` distinct path features.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::cube::{diagonal_cube, pair_index, Target, ValueFunctional};
use crate::error::{Error, Result};
use crate::patterns::check_cap;

const MAGIC: &[u8; 8] = b"TSHDDIAG";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCache {
    functional: ValueFunctional,
    depth: usize,
    /// `levels[k - 1]` holds `n_targets(k)` vectors of length `2^k`, back to back.
    levels: Vec<Vec<f64>>,
}

/// Bytes needed for a cache of the given depth.
pub fn cache_bytes(depth: usize, functional: ValueFunctional) -> u64 {
    (1..=depth)
        .map(|k| (functional.n_targets(k) as u64) << k)
        .sum::<u64>()
        * 8
}

/// Evaluate `functional` on every diagonal cube for `k = 1..=depth`.
pub fn compute_ms(
    depth: usize,
    functional: ValueFunctional,
    cap: usize,
    budget_bytes: u64,
) -> Result<DiagonalCache> {
    check_cap(cap)?;
    if depth > cap {
        return Err(Error::DepthCap { unique: depth, cap });
    }
    let needed = cache_bytes(depth, functional);
    if needed > budget_bytes {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget_bytes,
        });
    }
    let levels = (1..=depth)
        .map(|k| {
            let n = 1usize << k;
            let targets = functional.targets(k);
            let mut level = vec![0.0; targets.len() * n];
            level
                .par_chunks_mut(n)
                .zip(targets.par_iter())
                .for_each(|(out, &target)| fill_diagonal(k, functional, target, out));
            level
        })
        .collect();
    Ok(DiagonalCache {
        functional,
        depth,
        levels,
    })
}

/// Every diagonal cube has all `k` positions as literals, so its value only
/// depends on the positive count and on the signs at the target positions.
/// Each distinct case is evaluated once and copied.
fn fill_diagonal(k: usize, functional: ValueFunctional, target: Target, out: &mut [f64]) {
    // Target positions map to row bits `k - 1 - j`.
    let (first, second) = match target {
        Target::Position(j) => (k - 1 - j, None),
        Target::Pair(i, j) => (k - 1 - i, Some(k - 1 - j)),
    };
    let mut memo = vec![[f64::NAN; 4]; k + 1];
    let mut known = vec![[false; 4]; k + 1];
    for (a, slot) in out.iter_mut().enumerate() {
        let p = a.count_ones() as usize;
        let signs = (a >> first & 1) | second.map_or(0, |b| (a >> b & 1) << 1);
        if !known[p][signs] {
            memo[p][signs] = functional
                .value(&diagonal_cube(k, a as u32), target)
                .expect("targets come from the functional itself");
            known[p][signs] = true;
        }
        *slot = memo[p][signs];
    }
}

impl DiagonalCache {
    pub fn functional(&self) -> ValueFunctional {
        self.functional
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn byte_size(&self) -> u64 {
        self.levels.iter().map(|l| l.len() as u64 * 8).sum()
    }

    /// Diagonal for the `index`-th target of paths with `k` distinct features.
    #[inline]
    pub fn vector(&self, k: usize, index: usize) -> &[f64] {
        let n = 1usize << k;
        &self.levels[k - 1][index * n..(index + 1) * n]
    }

    pub fn target(&self, k: usize, target: Target) -> &[f64] {
        match target {
            Target::Position(j) => self.vector(k, j),
            Target::Pair(i, j) => self.vector(k, pair_index(k, i, j)),
        }
    }

    /// Perturb the all-ones entry of every diagonal. Used to check that
    /// validation catches a bad cache.
    #[doc(hidden)]
    pub fn corrupt(&mut self) {
        for (k, level) in (1..).zip(&mut self.levels) {
            for v in level.chunks_mut(1 << k) {
                v[v.len() - 1] += 0.125;
            }
        }
    }

    /// Flat little-endian encoding: magic, version, depth, functional, then
    /// every vector in `(k, target)` order as 64-bit floats.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.depth as u32).to_le_bytes())?;
        w.write_all(&[functional_code(self.functional)])?;
        for level in &self.levels {
            for v in level {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let parse = |msg: &str| Error::Parse(format!("diagonal cache: {msg}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| parse("truncated header"))?;
        if &magic != MAGIC {
            return Err(parse("bad magic"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)
            .map_err(|_| parse("truncated header"))?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(parse(&format!("unsupported version {version}")));
        }
        r.read_exact(&mut word)
            .map_err(|_| parse("truncated header"))?;
        let depth = u32::from_le_bytes(word) as usize;
        check_cap(depth.max(1)).map_err(|_| parse("depth out of range"))?;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)
            .map_err(|_| parse("truncated header"))?;
        let functional =
            functional_from_code(code[0]).ok_or_else(|| parse("unknown functional"))?;
        let mut levels = Vec::with_capacity(depth);
        let mut buf = [0u8; 8];
        for k in 1..=depth {
            let len = functional.n_targets(k) << k;
            let mut level = Vec::with_capacity(len);
            for _ in 0..len {
                r.read_exact(&mut buf)
                    .map_err(|_| parse("truncated data"))?;
                level.push(f64::from_le_bytes(buf));
            }
            levels.push(level);
        }
        if r.read(&mut buf).map_err(|e| parse(&e.to_string()))? != 0 {
            return Err(parse("trailing bytes"));
        }
        Ok(Self {
            functional,
            depth,
            levels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|()| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn functional_code(f: ValueFunctional) -> u8 {
    match f {
        ValueFunctional::Shapley => 0,
        ValueFunctional::Banzhaf => 1,
        ValueFunctional::ShapleyInteraction => 2,
    }
}

fn functional_from_code(code: u8) -> Option<ValueFunctional> {
    match code {
        0 => Some(ValueFunctional::Shapley),
        1 => Some(ValueFunctional::Banzhaf),
        2 => Some(ValueFunctional::ShapleyInteraction),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::cubes_in_diagonal;

    const BIG: u64 = u64::MAX;

    #[test]
    fn depth_one_shapley() {
        let c = compute_ms(1, ValueFunctional::Shapley, 26, BIG).unwrap();
        assert_eq!(c.vector(1, 0), &[-1.0, 1.0]);
    }

    #[test]
    fn depth_two_entries() {
        let c = compute_ms(2, ValueFunctional::Shapley, 26, BIG).unwrap();
        assert_eq!(c.vector(2, 0)[0b11], 0.5);
        let b = compute_ms(2, ValueFunctional::Banzhaf, 26, BIG).unwrap();
        assert_eq!(b.vector(2, 0), &[-0.5, -0.5, 0.5, 0.5]);
        let i = compute_ms(2, ValueFunctional::ShapleyInteraction, 26, BIG).unwrap();
        // AND of two positives, mixed, mixed, AND of two negatives
        assert_eq!(i.target(2, Target::Pair(0, 1)), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn matches_listing_cubes() {
        for f in [
            ValueFunctional::Shapley,
            ValueFunctional::Banzhaf,
            ValueFunctional::ShapleyInteraction,
        ] {
            let cache = compute_ms(7, f, 26, BIG).unwrap();
            for k in 1..=7 {
                let cubes = cubes_in_diagonal(k, 26).unwrap();
                for (t, target) in f.targets(k).into_iter().enumerate() {
                    for (a, cube) in cubes.iter().enumerate() {
                        assert_eq!(cache.vector(k, t)[a], f.value(cube, target).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn budget_and_cap() {
        let needed = cache_bytes(10, ValueFunctional::Shapley);
        assert_eq!(needed, 8 * (1..=10u64).map(|k| k << k).sum::<u64>());
        assert!(matches!(
            compute_ms(10, ValueFunctional::Shapley, 26, needed - 1),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(compute_ms(10, ValueFunctional::Shapley, 26, needed).is_ok());
        assert!(matches!(
            compute_ms(5, ValueFunctional::Shapley, 4, BIG),
            Err(Error::DepthCap { .. })
        ));
    }

    #[test]
    fn binary_round_trip() {
        let cache = compute_ms(6, ValueFunctional::ShapleyInteraction, 26, BIG).unwrap();
        let mut bytes = Vec::new();
        cache.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(bytes.len() as u64, 17 + cache.byte_size());
        assert_eq!(DiagonalCache::read_from(bytes.as_slice()).unwrap(), cache);
        bytes.truncate(bytes.len() - 3);
        assert!(DiagonalCache::read_from(bytes.as_slice()).is_err());
    }
}
