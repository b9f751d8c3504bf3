//! Spin representations of su(2) and the group map `π_m : SU(2) → U(m)`.
//!
//! Generators are normalized by the brackets `[X,Y] = 2Z`, `[Y,Z] = 2X`,
//! `[Z,X] = 2Y` and are skew-Hermitian. In the basis `|1⟩, …, |m⟩` where
//! `Z_m` is diagonal,
//!
//! ```text
//! Z_m |j⟩ = i (m - 2j + 1) |j⟩
//! X_m |j⟩ = √((j-1)(m-j+1)) |j-1⟩ - √(j(m-j)) |j+1⟩
//! Y_m |j⟩ = i √((j-1)(m-j+1)) |j-1⟩ + i √(j(m-j)) |j+1⟩
//! ```
//!
//! i.e. `X_m = J₊ - J₋`, `Y_m = i(J₊ + J₋)`, `Z_m = 2i J_z` for the spin
//! `(m-1)/2` ladder operators. For `m = 2` this gives exactly
//! `X = [[0,1],[-1,0]]`, `Y = [[0,i],[i,0]]`, `Z = [[i,0],[0,-i]]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkit::{c, commutator, expm_skew, identity, CMatrix, HermitianMatrix, I};

/// One of the three left-invariant directions spanning su(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    X,
    Y,
    Z,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::X, Direction::Y, Direction::Z];
    /// The bracket-generating pair driving the sub-Laplacian.
    pub const HORIZONTAL: [Direction; 2] = [Direction::X, Direction::Y];
}

/// The skew-Hermitian triple `(X_m, Y_m, Z_m)` of the `m`-dimensional irrep.
#[derive(Debug, Clone, PartialEq)]
pub struct IrrepGenerators {
    m: usize,
    x: CMatrix,
    y: CMatrix,
    z: CMatrix,
}

impl IrrepGenerators {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn x(&self) -> &CMatrix {
        &self.x
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn z(&self) -> &CMatrix {
        &self.z
    }

    pub fn get(&self, dir: Direction) -> &CMatrix {
        match dir {
            Direction::X => &self.x,
            Direction::Y => &self.y,
            Direction::Z => &self.z,
        }
    }

    /// `x X_m + y Y_m + z Z_m`.
    pub fn combination(&self, x: f64, y: f64, z: f64) -> CMatrix {
        &self.x * c(x) + &self.y * c(y) + &self.z * c(z)
    }

    /// Largest deviation from the three bracket relations.
    pub fn bracket_residuals(&self) -> [f64; 3] {
        let r = |a: &CMatrix, b: &CMatrix, target: &CMatrix| {
            crate::numkit::max_abs(&(commutator(a, b) - target * c(2.0)))
        };
        [r(&self.x, &self.y, &self.z), r(&self.y, &self.z, &self.x), r(&self.z, &self.x, &self.y)]
    }

    /// Largest deviation of `G† = -G` over the three generators.
    pub fn skew_residual(&self) -> f64 {
        [&self.x, &self.y, &self.z]
            .iter()
            .map(|g| crate::numkit::max_abs(&(g.adjoint() + *g)))
            .fold(0.0, f64::max)
    }

    /// Unitary `J` with `conj(π_m(g)) = J π_m(g) J⁻¹` for every `g`.
    ///
    /// `X_m` is real while `Y_m`, `Z_m` are imaginary, so `J` must commute
    /// with `X_m` and anticommute with the other two; the group element
    /// `exp(π/2 · X)` does exactly that.
    pub fn conjugator(&self) -> CMatrix {
        pi_m(self, &GroupElement::from_coords(0.0, 1.0, 0.0, 0.0))
    }
}

pub fn build_generators(m: usize) -> Result<IrrepGenerators> {
    if m == 0 {
        return invalid("representation dimension must be at least 1");
    }
    let mf = m as f64;
    // raise[j-1] = coefficient of |j-1⟩ in J₊|j⟩, 1-based j
    let up = |j: usize| (((j - 1) * (m + 1 - j)) as f64).sqrt();
    let down = |j: usize| ((j * (m - j)) as f64).sqrt();
    let mut x = CMatrix::zeros(m, m);
    let mut y = CMatrix::zeros(m, m);
    let mut z = CMatrix::zeros(m, m);
    for j in 1..=m {
        let col = j - 1;
        z[(col, col)] = I * (mf - 2.0 * j as f64 + 1.0);
        if j > 1 {
            x[(col - 1, col)] = c(up(j));
            y[(col - 1, col)] = I * up(j);
        }
        if j < m {
            x[(col + 1, col)] = c(-down(j));
            y[(col + 1, col)] = I * down(j);
        }
    }
    Ok(IrrepGenerators { m, x, y, z })
}

/// `X_m² + Y_m² + Z_m²`, which equals `-(m²-1) I`.
pub fn casimir(gen: &IrrepGenerators) -> HermitianMatrix {
    HermitianMatrix::symmetrize(&gen.x * &gen.x + &gen.y * &gen.y + &gen.z * &gen.z)
}

/// `X_m² + Y_m²`, the symbol of the sub-Laplacian on the `m`-th band.
pub fn horizontal_symbol(gen: &IrrepGenerators) -> HermitianMatrix {
    HermitianMatrix::symmetrize(&gen.x * &gen.x + &gen.y * &gen.y)
}

/// Closed-form diagonal of [`horizontal_symbol`]: `-(m²-1) + (m-2j+1)²`.
pub fn horizontal_eigenvalues(m: usize) -> Vec<f64> {
    let mf = m as f64;
    (1..=m)
        .map(|j| {
            let w = mf - 2.0 * j as f64 + 1.0;
            -(mf * mf - 1.0) + w * w
        })
        .collect()
}

/// A point of SU(2) ≅ S³, the matrix `c I + x X + y Y + z Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { c: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Validated constructor; the coordinates must lie on the unit sphere.
    pub fn new(c: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = c * c + x * x + y * y + z * z;
        if !n2.is_finite() || (n2 - 1.0).abs() > 1e-12 {
            return invalid(format!("quaternion norm² {n2} is not 1"));
        }
        Ok(GroupElement { c, x, y, z })
    }

    /// Normalizes arbitrary nonzero coordinates onto the sphere.
    pub fn from_coords(c: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (c * c + x * x + y * y + z * z).sqrt();
        GroupElement { c: c / n, x: x / n, y: y / n, z: z / n }
    }

    /// `exp(t V)` for a unit direction `V ∈ {X, Y, Z}`.
    pub fn exp(dir: Direction, t: f64) -> Self {
        let (s, co) = t.sin_cos();
        match dir {
            Direction::X => GroupElement { c: co, x: s, y: 0.0, z: 0.0 },
            Direction::Y => GroupElement { c: co, x: 0.0, y: s, z: 0.0 },
            Direction::Z => GroupElement { c: co, x: 0.0, y: 0.0, z: s },
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c * self.c + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn inverse(&self) -> Self {
        GroupElement { c: self.c, x: -self.x, y: -self.y, z: -self.z }
    }

    /// The defining 2×2 matrix `[[c + iz, x + iy], [-x + iy, c - iz]]`.
    pub fn to_matrix(&self) -> CMatrix {
        use crate::numkit::C64;
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(self.c, self.z),
                C64::new(self.x, self.y),
                C64::new(-self.x, self.y),
                C64::new(self.c, -self.z),
            ],
        )
    }

    /// Reads coordinates back from a 2×2 matrix of the form [`Self::to_matrix`].
    pub fn from_matrix(a: &CMatrix) -> Self {
        GroupElement { c: a[(0, 0)].re, z: a[(0, 0)].im, x: a[(0, 1)].re, y: a[(0, 1)].im }
    }

    /// Group product, computed with the Hamilton rules `X² = Y² = Z² = -1`,
    /// `XY = Z`, `YZ = X`, `ZX = Y`.
    pub fn mul(&self, h: &GroupElement) -> GroupElement {
        let (a, b) = (self, h);
        GroupElement {
            c: a.c * b.c - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.c * b.x + a.x * b.c + a.y * b.z - a.z * b.y,
            y: a.c * b.y + a.y * b.c + a.z * b.x - a.x * b.z,
            z: a.c * b.z + a.z * b.c + a.x * b.y - a.y * b.x,
        }
    }
}

/// `π_m(g) = exp(φ_m(log g))`.
///
/// `log g = θ (x, y, z)/|(x, y, z)|` with `θ = atan2(|(x,y,z)|, c)`; at
/// `g = -I` the axis is fixed to `X`.
pub fn pi_m(gen: &IrrepGenerators, g: &GroupElement) -> CMatrix {
    let r = (g.x * g.x + g.y * g.y + g.z * g.z).sqrt();
    let theta = r.atan2(g.c);
    if theta == 0.0 {
        return identity(gen.m);
    }
    let (ax, ay, az) = if r > 0.0 { (g.x / r, g.y / r, g.z / r) } else { (1.0, 0.0, 0.0) };
    expm_skew(&gen.combination(theta * ax, theta * ay, theta * az))
}

/// `count` independent Haar-distributed elements; deterministic per seed.
pub fn haar_sample(rng_seed: u64, count: usize) -> Vec<GroupElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    haar_sample_with(&mut rng, count)
}

pub fn haar_sample_with<R: rand::Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<GroupElement> {
    (0..count)
        .map(|_| loop {
            let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
            let n2: f64 = v.iter().map(|t| t * t).sum();
            if n2 > 1e-24 {
                break GroupElement::from_coords(v[0], v[1], v[2], v[3]);
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{max_abs, C64};

    fn mat2(a: [C64; 4]) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &a)
    }

    #[test]
    fn m2_matches_defining_matrices() {
        let g = build_generators(2).unwrap();
        let o = c(0.0);
        assert_eq!(g.x(), &mat2([o, c(1.0), c(-1.0), o]));
        assert_eq!(g.y(), &mat2([o, I, I, o]));
        assert_eq!(g.z(), &mat2([I, o, o, -I]));
    }

    #[test]
    fn trivial_rep_is_zero() {
        let g = build_generators(1).unwrap();
        for d in Direction::ALL {
            assert_eq!(g.get(d)[(0, 0)], c(0.0));
        }
        assert_eq!(casimir(&g).matrix()[(0, 0)], c(0.0));
        assert_eq!(horizontal_symbol(&g).matrix()[(0, 0)], c(0.0));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(build_generators(0).is_err());
    }

    #[test]
    fn brackets_and_casimir_up_to_eight() {
        for m in 1..=8 {
            let g = build_generators(m).unwrap();
            for r in g.bracket_residuals() {
                assert!(r < 1e-10, "m={m} bracket residual {r}");
            }
            assert!(g.skew_residual() < 1e-12);
            let target = identity(m) * c(-((m * m) as f64 - 1.0));
            assert!(max_abs(&(casimir(&g).matrix() - target)) < 1e-10);
        }
    }

    #[test]
    fn casimir_examples() {
        let g2 = build_generators(2).unwrap();
        assert!(max_abs(&(casimir(&g2).matrix() - identity(2) * c(-3.0))) < 1e-14);
        let g3 = build_generators(3).unwrap();
        assert!(max_abs(&(casimir(&g3).matrix() - identity(3) * c(-8.0))) < 1e-12);
    }

    #[test]
    fn horizontal_symbol_examples() {
        let h2 = horizontal_symbol(&build_generators(2).unwrap());
        assert!(max_abs(&(h2.matrix() - identity(2) * c(-2.0))) < 1e-14);
        let h3 = horizontal_symbol(&build_generators(3).unwrap());
        let want = HermitianMatrix::from_real_diagonal(&[-4.0, -8.0, -4.0]);
        assert!(max_abs(&(h3.matrix() - want.matrix())) < 1e-12);
        assert_eq!(horizontal_eigenvalues(3), vec![-4.0, -8.0, -4.0]);
    }

    #[test]
    fn horizontal_symbol_commutes_with_z() {
        for m in 1..=8 {
            let g = build_generators(m).unwrap();
            let h = horizontal_symbol(&g);
            assert!(max_abs(&commutator(h.matrix(), g.z())) < 1e-10);
        }
    }

    #[test]
    fn pi_identity_and_m2() {
        for m in 1..=5 {
            let g = build_generators(m).unwrap();
            assert!(max_abs(&(pi_m(&g, &GroupElement::IDENTITY) - identity(m))) < 1e-15);
        }
        let g2 = build_generators(2).unwrap();
        for h in haar_sample(4, 20) {
            let want = identity(2) * c(h.c) + g2.combination(h.x, h.y, h.z);
            assert!(max_abs(&(pi_m(&g2, &h) - &want)) < 1e-10);
            assert!(max_abs(&(h.to_matrix() - want)) < 1e-15);
        }
    }

    #[test]
    fn minus_identity_is_handled() {
        let g2 = build_generators(2).unwrap();
        let minus = GroupElement::new(-1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(max_abs(&(pi_m(&g2, &minus) + identity(2))) < 1e-12);
        let g3 = build_generators(3).unwrap();
        // integer spin: -I acts trivially
        assert!(max_abs(&(pi_m(&g3, &minus) - identity(3))) < 1e-12);
    }

    #[test]
    fn quaternion_product_matches_matrix_product() {
        let s = haar_sample(8, 10);
        for w in s.windows(2) {
            let prod = w[0].mul(&w[1]);
            let mat = w[0].to_matrix() * w[1].to_matrix();
            assert!(max_abs(&(prod.to_matrix() - &mat)) < 1e-14);
            let back = GroupElement::from_matrix(&mat);
            assert!((back.c - prod.c).abs() < 1e-14);
        }
    }

    #[test]
    fn homomorphism_m3() {
        let g3 = build_generators(3).unwrap();
        let s = haar_sample(21, 20);
        for w in s.chunks(2) {
            let lhs = pi_m(&g3, &w[0].mul(&w[1]));
            let rhs = pi_m(&g3, &w[0]) * pi_m(&g3, &w[1]);
            assert!(max_abs(&(lhs - rhs)) < 1e-8);
        }
    }

    #[test]
    fn inverse_and_real_trace() {
        for m in 1..=6 {
            let gen = build_generators(m).unwrap();
            for g in haar_sample(100 + m as u64, 100) {
                let p = pi_m(&gen, &g);
                let q = pi_m(&gen, &g.inverse());
                assert!(max_abs(&(&p * &q - identity(m))) < 1e-8);
                assert!(p.trace().im.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn conjugator_intertwines_complex_conjugation() {
        for m in 1..=5 {
            let gen = build_generators(m).unwrap();
            let j = gen.conjugator();
            let jinv = j.adjoint();
            for g in haar_sample(7, 5) {
                let p = pi_m(&gen, &g);
                assert!(max_abs(&(p.map(|z| z.conj()) - &j * &p * &jinv)) < 1e-10);
            }
        }
    }

    #[test]
    fn haar_points_are_normalized_and_deterministic() {
        let a = haar_sample(3, 50);
        let b = haar_sample(3, 50);
        assert_eq!(a, b);
        for g in &a {
            assert!((g.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_mean_statistics() {
        let n = 100_000;
        let s = haar_sample(2024, n);
        let mean_c = s.iter().map(|g| g.c).sum::<f64>() / n as f64;
        assert!(mean_c.abs() < 0.01, "mean c = {mean_c}");

        // Schur orthogonality: the (1,1) entry of π_2 has Haar mean 0
        let vals: Vec<C64> = s.iter().map(|g| C64::new(g.c, g.z)).collect();
        let mean = vals.iter().sum::<C64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(mean.norm() < 3.0 * se, "mean {mean} se {se}");
    }
}
