//! Weighted cubes, the pattern-to-cube constructions and the linear value
//! functionals evaluated on single cubes.
//!
//! Literal sets are bit masks over feature *positions* (position `j` is the
//! `j`-th distinct feature on a path). Patterns place position `j` at bit
//! `k - 1 - j`, so the first feature is the most significant bit.
//!
//! Index convention: a consumer bit of 1 with a background bit of 0 gives a
//! positive literal, 0/1 a negative literal, 1/1 no literal and 0/0 no cube.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fastmult::DenseMatrix;
use crate::patterns::{check_cap, Pattern};

/// A conjunction of positive and negative literals with a weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub positive: u32,
    pub negative: u32,
    pub weight: f64,
}

impl Cube {
    pub const EMPTY: Cube = Cube {
        positive: 0,
        negative: 0,
        weight: 1.0,
    };

    /// Panics if the literal sets overlap; such a cube is unsatisfiable.
    pub fn new(positive: u32, negative: u32) -> Self {
        assert_eq!(positive & negative, 0, "cube contains x and not-x");
        Self {
            positive,
            negative,
            weight: 1.0,
        }
    }

    pub fn with_weight(self, weight: f64) -> Self {
        Self { weight, ..self }
    }

    pub fn p(&self) -> u32 {
        self.positive.count_ones()
    }

    pub fn q(&self) -> u32 {
        self.negative.count_ones()
    }

    pub fn players(&self) -> u32 {
        self.positive | self.negative
    }

    /// Value of the cube game on coalition `s` (a position mask).
    pub fn eval(&self, s: u32) -> f64 {
        if self.positive & !s == 0 && self.negative & s == 0 {
            self.weight
        } else {
            0.0
        }
    }
}

/// Sparse `2^k x 2^k` map from (consumer pattern, background pattern) to cube.
#[derive(Debug, Clone)]
pub struct MCubesMatrix {
    k: usize,
    /// Sorted by (row, col).
    entries: Vec<(Pattern, Pattern, Cube)>,
}

impl MCubesMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Pattern, Pattern, Cube)] {
        &self.entries
    }

    pub fn get(&self, row: Pattern, col: Pattern) -> Option<&Cube> {
        self.entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
            .ok()
            .map(|i| &self.entries[i].2)
    }

    /// Apply a per-cube value to every entry; absent entries are zero.
    pub fn densify(&self, value: impl Fn(&Cube) -> f64) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(1 << self.k);
        for &(r, c, ref cube) in &self.entries {
            m.set(r as usize, c as usize, value(cube));
        }
        m
    }
}

/// Build the cube for every (consumer, background) pattern pair over `k`
/// positions by expanding one feature at a time. Produces `3^k` entries.
pub fn map_patterns_to_cube(k: usize, cap: usize) -> Result<MCubesMatrix> {
    check_k(k, cap)?;
    let mut d: Vec<(Pattern, Pattern, Cube)> = vec![(0, 0, Cube::EMPTY)];
    for j in 0..k {
        let bit = 1u32 << j;
        let mut next = Vec::with_capacity(d.len() * 3);
        for &(pc, pb, cube) in &d {
            next.push((
                2 * pc + 1,
                2 * pb,
                Cube {
                    positive: cube.positive | bit,
                    ..cube
                },
            ));
            next.push((
                2 * pc,
                2 * pb + 1,
                Cube {
                    negative: cube.negative | bit,
                    ..cube
                },
            ));
            next.push((2 * pc + 1, 2 * pb + 1, cube));
        }
        d = next;
    }
    d.sort_unstable_by_key(|&(r, c, _)| (r, c));
    Ok(MCubesMatrix { k, entries: d })
}

/// Cubes on the secondary diagonal, indexed by row. Same expansion as
/// [`map_patterns_to_cube`] minus the case that keeps both bits set.
pub fn cubes_in_diagonal(k: usize, cap: usize) -> Result<Vec<Cube>> {
    check_k(k, cap)?;
    let mut d: Vec<(Pattern, Cube)> = vec![(0, Cube::EMPTY)];
    for j in 0..k {
        let bit = 1u32 << j;
        let mut next = Vec::with_capacity(d.len() * 2);
        for &(pc, cube) in &d {
            next.push((
                2 * pc + 1,
                Cube {
                    positive: cube.positive | bit,
                    ..cube
                },
            ));
            next.push((
                2 * pc,
                Cube {
                    negative: cube.negative | bit,
                    ..cube
                },
            ));
        }
        d = next;
    }
    let mut out = vec![Cube::EMPTY; 1 << k];
    for (row, cube) in d {
        out[row as usize] = cube;
    }
    Ok(out)
}

/// Closed form of `cubes_in_diagonal(k)[row]`: position `j` is positive iff
/// bit `k - 1 - j` of `row` is set.
#[inline]
pub fn diagonal_cube(k: usize, row: Pattern) -> Cube {
    if k == 0 {
        return Cube::EMPTY;
    }
    let full = (1u32 << k) - 1;
    let positive = row.reverse_bits() >> (32 - k);
    Cube {
        positive,
        negative: full & !positive,
        weight: 1.0,
    }
}

fn check_k(k: usize, cap: usize) -> Result<()> {
    check_cap(cap)?;
    if k > cap {
        return Err(Error::DepthCap { unique: k, cap });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueFunctional {
    Shapley,
    Banzhaf,
    ShapleyInteraction,
}

/// What a functional is evaluated for: one position or an ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Position(usize),
    Pair(usize, usize),
}

impl ValueFunctional {
    /// Targets for a path with `k` positions: positions in order, or pairs
    /// `(i, j)` with `i < j` in lexicographic order.
    pub fn targets(self, k: usize) -> Vec<Target> {
        match self {
            ValueFunctional::Shapley | ValueFunctional::Banzhaf => {
                (0..k).map(Target::Position).collect()
            }
            ValueFunctional::ShapleyInteraction => (0..k)
                .flat_map(|i| (i + 1..k).map(move |j| Target::Pair(i, j)))
                .collect(),
        }
    }

    pub fn n_targets(self, k: usize) -> usize {
        match self {
            ValueFunctional::Shapley | ValueFunctional::Banzhaf => k,
            ValueFunctional::ShapleyInteraction => k * k.saturating_sub(1) / 2,
        }
    }

    pub fn value(self, cube: &Cube, target: Target) -> Result<f64> {
        match (self, target) {
            (ValueFunctional::Shapley, Target::Position(j)) => Ok(shapley_of_cube(cube, j)),
            (ValueFunctional::Banzhaf, Target::Position(j)) => Ok(banzhaf_of_cube(cube, j)),
            (ValueFunctional::ShapleyInteraction, Target::Pair(i, j)) => {
                shapley_interaction_of_cube(cube, i, j)
            }
            _ => Err(Error::Invalid(format!(
                "target {target:?} does not fit functional {self:?}"
            ))),
        }
    }
}

/// Index of pair `(i, j)`, `i < j`, in [`ValueFunctional::targets`] order.
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * (2 * k - i - 1) / 2 + (j - i - 1)
}

const BINOM_N: usize = 64;

fn binomials() -> &'static [[f64; BINOM_N]; BINOM_N] {
    static TABLE: OnceLock<Box<[[f64; BINOM_N]; BINOM_N]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Box::new([[0.0; BINOM_N]; BINOM_N]);
        for n in 0..BINOM_N {
            t[n][0] = 1.0;
            for r in 1..=n {
                t[n][r] = t[n - 1][r - 1] + t[n - 1][r];
            }
        }
        t
    })
}

/// `C(n, r)`, exact in `f64` for the sizes used here.
#[inline]
fn binom(n: u32, r: u32) -> f64 {
    binomials()[n as usize][r as usize]
}

/// Shapley value of `position` in the game `C(S) = weight` iff `S` contains
/// every positive and no negative literal. With `p` positive and `q` negative
/// literals: `(p-1)! q! / (p+q)!` for a positive member, `-p! (q-1)! / (p+q)!`
/// for a negative one, written as reciprocals of exact integers.
pub fn shapley_of_cube(cube: &Cube, position: usize) -> f64 {
    let bit = 1u32 << position;
    let (p, q) = (cube.p(), cube.q());
    let n = p + q;
    if cube.positive & bit != 0 {
        cube.weight / (f64::from(n) * binom(n - 1, q))
    } else if cube.negative & bit != 0 {
        -cube.weight / (f64::from(n) * binom(n - 1, p))
    } else {
        0.0
    }
}

/// Banzhaf value: `±weight · 2^(1-p-q)` for literal members, else 0.
pub fn banzhaf_of_cube(cube: &Cube, position: usize) -> f64 {
    let bit = 1u32 << position;
    let scale = (1.0 - f64::from(cube.p() + cube.q())).exp2();
    if cube.positive & bit != 0 {
        cube.weight * scale
    } else if cube.negative & bit != 0 {
        -cube.weight * scale
    } else {
        0.0
    }
}

/// Shapley interaction index of the pair `(i, j)`.
///
/// Only one coalition contributes to the discrete second derivative of a
/// cube game, which gives, with `n = p + q`:
/// both positive `(p-2)! q! / (n-1)!`, both negative `p! (q-2)! / (n-1)!`,
/// mixed signs `-(p-1)! (q-1)! / (n-1)!`, and 0 if either is not a literal.
pub fn shapley_interaction_of_cube(cube: &Cube, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidPair(i));
    }
    let (bi, bj) = (1u32 << i, 1u32 << j);
    if cube.players() & bi == 0 || cube.players() & bj == 0 {
        return Ok(0.0);
    }
    let (p, q) = (cube.p(), cube.q());
    let n = p + q;
    let pos_i = cube.positive & bi != 0;
    let pos_j = cube.positive & bj != 0;
    let denom = f64::from(n - 1);
    Ok(match (pos_i, pos_j) {
        (true, true) => cube.weight / (denom * binom(n - 2, q)),
        (false, false) => cube.weight / (denom * binom(n - 2, p)),
        _ => -cube.weight / (denom * binom(n - 2, p - 1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AGE: u32 = 1 << 0;
    const SUGAR: u32 = 1 << 1;

    #[test]
    fn map_patterns_two_features() {
        let m = map_patterns_to_cube(2, 26).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.get(0b10, 0b01), Some(&Cube::new(AGE, SUGAR)));
        assert_eq!(m.get(0b11, 0b11), Some(&Cube::EMPTY));
        assert_eq!(m.get(0b00, 0b00), None);
        assert_eq!(m.get(0b00, 0b11), Some(&Cube::new(0, AGE | SUGAR)));
        assert_eq!(m.get(0b01, 0b10), Some(&Cube::new(SUGAR, AGE)));
        assert_eq!(m.get(0b11, 0b01), Some(&Cube::new(AGE, 0)));
        assert_eq!(m.get(0b10, 0b11), Some(&Cube::new(0, SUGAR)));
    }

    #[test]
    fn map_patterns_small() {
        let m = map_patterns_to_cube(1, 26).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.get(1, 0), Some(&Cube::new(1, 0)));
        assert_eq!(m.get(0, 1), Some(&Cube::new(0, 1)));
        assert_eq!(m.get(1, 1), Some(&Cube::EMPTY));
        let m = map_patterns_to_cube(3, 26).unwrap();
        assert_eq!(m.len(), 27);
        assert_eq!(m.get(0b111, 0b111), Some(&Cube::EMPTY));
        assert!(matches!(
            map_patterns_to_cube(5, 4),
            Err(Error::DepthCap { .. })
        ));
    }

    #[test]
    fn diagonal_cubes() {
        let d = cubes_in_diagonal(1, 26).unwrap();
        assert_eq!(d, vec![Cube::new(0, 1), Cube::new(1, 0)]);
        let d = cubes_in_diagonal(2, 26).unwrap();
        assert_eq!(d[0b10], Cube::new(AGE, SUGAR));
        for k in 0..=8 {
            let m = map_patterns_to_cube(k, 26).unwrap();
            let d = cubes_in_diagonal(k, 26).unwrap();
            let full = (1u32 << k) - 1;
            for a in 0..=full {
                assert_eq!(m.get(a, full - a), Some(&d[a as usize]));
                assert_eq!(diagonal_cube(k, a), d[a as usize]);
            }
        }
    }

    #[test]
    fn shapley_examples() {
        let x1 = Cube::new(1, 0);
        assert_eq!(shapley_of_cube(&x1, 0), 1.0);
        let c = Cube::new(1, 2);
        assert_eq!(shapley_of_cube(&c, 0), 0.5);
        assert_eq!(shapley_of_cube(&c, 1), -0.5);
        let c = Cube::new(0b011, 0b100);
        assert!((shapley_of_cube(&c, 0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((shapley_of_cube(&c, 1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((shapley_of_cube(&c, 2) + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(shapley_of_cube(&Cube::EMPTY, 0), 0.0);
        assert_eq!(shapley_of_cube(&x1.with_weight(-2.5), 0), -2.5);
    }

    #[test]
    fn banzhaf_examples() {
        assert_eq!(banzhaf_of_cube(&Cube::new(1, 0), 0), 1.0);
        assert_eq!(banzhaf_of_cube(&Cube::new(1, 2), 0), 0.5);
        assert_eq!(banzhaf_of_cube(&Cube::new(1, 2), 1), -0.5);
        assert_eq!(banzhaf_of_cube(&Cube::EMPTY, 3), 0.0);
    }

    #[test]
    fn interaction_examples() {
        assert_eq!(
            shapley_interaction_of_cube(&Cube::new(3, 0), 0, 1).unwrap(),
            1.0
        );
        assert_eq!(
            shapley_interaction_of_cube(&Cube::new(1, 0), 0, 1).unwrap(),
            0.0
        );
        assert_eq!(
            shapley_interaction_of_cube(&Cube::new(1, 2), 0, 1).unwrap(),
            -1.0
        );
        assert_eq!(
            shapley_interaction_of_cube(&Cube::new(0, 3), 1, 0).unwrap(),
            1.0
        );
        assert!(matches!(
            shapley_interaction_of_cube(&Cube::new(3, 0), 1, 1),
            Err(Error::InvalidPair(1))
        ));
    }

    #[test]
    fn pair_indices_follow_target_order() {
        for k in 2..8 {
            let targets = ValueFunctional::ShapleyInteraction.targets(k);
            assert_eq!(
                targets.len(),
                ValueFunctional::ShapleyInteraction.n_targets(k)
            );
            for (idx, t) in targets.iter().enumerate() {
                let Target::Pair(i, j) = *t else {
                    unreachable!()
                };
                assert_eq!(pair_index(k, i, j), idx);
            }
        }
    }
}
