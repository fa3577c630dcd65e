//! H-type groups in exponential coordinates: structure constants, group law,
//! dilations, the maps `J_mu`, the canonical rotation `T_lambda` and the
//! projection onto the Heisenberg group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, min_gram_pivot, norm2, Mat};
use crate::real::{lit, to_f64, Real};

/// Number of random unit vectors used by [`HTypeStructure::validate`] by default.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 64;

/// Step-2 structure `(d, m, {L^alpha})` of an H-type group.
///
/// Horizontal coordinates are ordered `(x_1..x_d, y_1..y_d)` for the
/// Heisenberg constructor; the group law is
/// `z''_a = z_a + z'_a + 1/2 x^T L^a x'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StructureRepr", into = "StructureRepr")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HTypeStructure<T: Real> {
    d: usize,
    m: usize,
    brackets: Vec<Mat<T>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureRepr {
    d: usize,
    #[serde(default = "one")]
    m: usize,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    brackets: Option<Vec<Vec<f64>>>,
}

fn one() -> usize {
    1
}

impl<T: Real> TryFrom<StructureRepr> for HTypeStructure<T> {
    type Error = Error;

    fn try_from(r: StructureRepr) -> Result<Self> {
        match r.brackets {
            None if r.m == 1 => Self::heisenberg(r.d),
            None => Err(Error::InvalidParameter(format!(
                "\"L\" may only be omitted for m = 1 (got m = {})",
                r.m
            ))),
            Some(ls) => {
                let n = 2 * r.d;
                let mats = ls
                    .into_iter()
                    .map(|flat| {
                        if flat.len() != n * n {
                            return Err(Error::DimensionMismatch {
                                what: "bracket matrix entries",
                                expected: n * n,
                                found: flat.len(),
                            });
                        }
                        Ok(Mat::from_row_major(n, n, flat.into_iter().map(lit).collect()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if mats.len() != r.m {
                    return Err(Error::DimensionMismatch {
                        what: "number of bracket matrices",
                        expected: r.m,
                        found: mats.len(),
                    });
                }
                Self::new(r.d, mats)
            }
        }
    }
}

impl<T: Real> From<HTypeStructure<T>> for StructureRepr {
    fn from(s: HTypeStructure<T>) -> Self {
        let brackets = s
            .brackets
            .iter()
            .map(|l| l.as_slice().iter().map(|&v| to_f64(v)).collect())
            .collect();
        StructureRepr {
            d: s.d,
            m: s.m,
            brackets: Some(brackets),
        }
    }
}

impl<T: Real> HTypeStructure<T> {
    /// Arbitrary brackets; shapes and antisymmetry are checked here, the
    /// H-type identity by [`validate`](Self::validate).
    pub fn new(d: usize, brackets: Vec<Mat<T>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if brackets.is_empty() {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        for l in &brackets {
            if l.rows() != 2 * d || l.cols() != 2 * d {
                return Err(Error::DimensionMismatch {
                    what: "bracket matrix size",
                    expected: 2 * d,
                    found: l.rows().max(l.cols()),
                });
            }
        }
        let m = brackets.len();
        Ok(Self { d, m, brackets })
    }

    /// Heisenberg group of dimension `2d + 1`.
    pub fn heisenberg(d: usize) -> Result<Self> {
        Self::new(d, vec![standard_form(d)])
    }

    /// Quaternionic H-type group (`m = 3`, `d` even): left multiplication by
    /// the units `i, j, k` on each block of four horizontal coordinates.
    pub fn quaternionic(d: usize) -> Result<Self> {
        if d == 0 || d % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "quaternionic structure needs even d, got {d}"
            )));
        }
        let units: [[[f64; 4]; 4]; 3] = [
            [[0., -1., 0., 0.], [1., 0., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]],
            [[0., 0., -1., 0.], [0., 0., 0., 1.], [1., 0., 0., 0.], [0., -1., 0., 0.]],
            [[0., 0., 0., -1.], [0., 0., -1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]],
        ];
        let n = 2 * d;
        let brackets = units
            .iter()
            .map(|u| {
                let mut l = Mat::zeros(n, n);
                for b in 0..n / 4 {
                    for i in 0..4 {
                        for j in 0..4 {
                            l[(4 * b + i, 4 * b + j)] = lit(u[i][j]);
                        }
                    }
                }
                l
            })
            .collect();
        Self::new(d, brackets)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Homogeneous dimension `Q = 2d + 2m`.
    pub fn homogeneous_dim(&self) -> usize {
        2 * self.d + 2 * self.m
    }

    pub fn brackets(&self) -> &[Mat<T>] {
        &self.brackets
    }

    pub fn is_heisenberg(&self) -> bool {
        self.m == 1 && self.brackets[0] == standard_form(self.d)
    }

    fn check_point(&self, p: &GroupPoint<T>) -> Result<()> {
        if p.x.len() != 2 * self.d {
            return Err(Error::DimensionMismatch {
                what: "horizontal coordinates",
                expected: 2 * self.d,
                found: p.x.len(),
            });
        }
        if p.z.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "vertical coordinates",
                expected: self.m,
                found: p.z.len(),
            });
        }
        Ok(())
    }

    fn check_frequency(&self, mu: &DualFrequency<T>) -> Result<()> {
        if mu.lambda.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "dual frequency",
                expected: self.m,
                found: mu.lambda.len(),
            });
        }
        Ok(())
    }

    /// Group product in exponential coordinates.
    pub fn multiply(&self, a: &GroupPoint<T>, b: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check_point(a)?;
        self.check_point(b)?;
        let half = lit::<T>(0.5);
        let x = a.x.iter().zip(&b.x).map(|(&u, &v)| u + v).collect();
        let z = self
            .brackets
            .iter()
            .enumerate()
            .map(|(k, l)| a.z[k] + b.z[k] + half * l.bilinear(&a.x, &b.x))
            .collect();
        Ok(GroupPoint { x, z })
    }

    /// Linear combination `sum_a mu_a L^a`.
    pub fn bracket_form(&self, mu: &[T]) -> Mat<T> {
        let n = 2 * self.d;
        self.brackets
            .iter()
            .zip(mu)
            .fold(Mat::zeros(n, n), |acc, (l, &c)| acc.add(&l.scale(c)))
    }

    /// `J_mu = sum_a mu_a (L^a)^T`, so that `<mu, [X, Y]> = <X, J_mu Y>`.
    pub fn j_map(&self, mu: &DualFrequency<T>) -> Result<Mat<T>> {
        self.check_frequency(mu)?;
        Ok(self.bracket_form(&mu.lambda).transpose())
    }

    /// Canonical orthogonal `T_lambda` with `J_lambda = |lambda| T J T^T`,
    /// `J = [[0, -I], [I, 0]]`.
    ///
    /// Columns are `[v_1..v_d | J_omega v_1 .. J_omega v_d]` where `v_j` is
    /// the normalized residual of the first standard basis vector not yet
    /// spanned.
    pub fn diagonalize_j(&self, lam: &DualFrequency<T>) -> Result<Mat<T>> {
        let omega = lam.omega();
        let j = self.j_map(&DualFrequency::new(omega.clone())?)?;
        let n = 2 * self.d;
        let resid = (&j * &j).add(&Mat::identity(n)).sup_norm();
        if resid > lit(1e-8) {
            return Err(Error::NotHType {
                witness: omega.iter().map(|&v| to_f64(v)).collect(),
                residual: to_f64(resid),
            });
        }
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
        let mut vs = Vec::with_capacity(self.d);
        let mut ws = Vec::with_capacity(self.d);
        for i in 0..n {
            if vs.len() == self.d {
                break;
            }
            let mut v = vec![T::zero(); n];
            v[i] = T::one();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(vi, &bi)| *vi -= c * bi);
                }
            }
            let nv = norm2(&v);
            if nv < lit(0.5) {
                continue;
            }
            v.iter_mut().for_each(|vi| *vi /= nv);
            let w = j.matvec(&v);
            basis.push(v.clone());
            basis.push(w.clone());
            vs.push(v);
            ws.push(w);
        }
        let mut t = Mat::zeros(n, n);
        for (c, col) in vs.iter().chain(ws.iter()).enumerate() {
            for r in 0..n {
                t[(r, c)] = col[r];
            }
        }
        Ok(t)
    }

    /// Surjective homomorphism onto the Heisenberg group of the same `d`:
    /// `(x, z) -> (T_lambda^T x, omega . z)`.
    pub fn to_heisenberg(&self, p: &GroupPoint<T>, lam: &DualFrequency<T>) -> Result<GroupPoint<T>> {
        self.check_point(p)?;
        let t = self.diagonalize_j(lam)?;
        let omega = lam.omega();
        Ok(GroupPoint {
            x: t.transpose().matvec(&p.x),
            z: vec![dot(&omega, &p.z)],
        })
    }

    /// Coefficients `c_a` of `d/dz_a` in the left-invariant field
    /// `X_i = d/dx_i + sum_a c_a(x) d/dz_a`.
    pub fn vertical_coefficients(&self, i: usize, x: &[T]) -> Vec<T> {
        let half = lit::<T>(0.5);
        self.brackets
            .iter()
            .map(|l| {
                let row: T = (0..2 * self.d).map(|j| l[(i, j)] * x[j]).sum();
                -half * row
            })
            .collect()
    }

    /// Checks antisymmetry, independence and `J_mu^2 = -|mu|^2 I` on
    /// `n_samples` random unit vectors.
    pub fn validate(&self, n_samples: usize, seed: u64) -> ValidationReport {
        let n = 2 * self.d;
        let max_antisymmetry = self
            .brackets
            .iter()
            .map(|l| to_f64(l.antisymmetry_residual()))
            .fold(0.0, f64::max);
        let flat: Vec<Vec<T>> = self.brackets.iter().map(|l| l.as_slice().to_vec()).collect();
        let min_pivot = to_f64(min_gram_pivot(&flat));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_residual = 0.0;
        let mut witness = None;
        for s in 0..n_samples.max(1) {
            // Coordinate axes first, then random directions.
            let mu: Vec<f64> = if s < self.m {
                (0..self.m).map(|a| if a == s { 1.0 } else { 0.0 }).collect()
            } else {
                let g: Vec<f64> = (0..self.m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nrm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                g.iter().map(|v| v / nrm).collect()
            };
            let mu_t: Vec<T> = mu.iter().map(|&v| lit(v)).collect();
            let j = self.bracket_form(&mu_t).transpose();
            let r = to_f64((&j * &j).add(&Mat::identity(n)).sup_norm());
            if r > max_residual {
                max_residual = r;
                witness = Some(mu);
            }
        }
        let tol = 1e3 * to_f64(T::epsilon());
        let passed = max_antisymmetry <= tol && min_pivot > tol && max_residual <= tol;
        ValidationReport {
            max_antisymmetry,
            min_pivot,
            max_residual,
            witness: if passed { None } else { witness },
            passed,
        }
    }
}

/// `[[0, I], [-I, 0]]` in `(x, y)` ordering.
pub fn standard_form<T: Real>(d: usize) -> Mat<T> {
    let mut l = Mat::zeros(2 * d, 2 * d);
    for i in 0..d {
        l[(i, d + i)] = T::one();
        l[(d + i, i)] = -T::one();
    }
    l
}

/// Outcome of [`HTypeStructure::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub max_antisymmetry: f64,
    pub min_pivot: f64,
    pub max_residual: f64,
    /// Unit vector attaining the largest `J_mu^2 + I` residual, on failure.
    pub witness: Option<Vec<f64>>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        if self.max_antisymmetry > 1e-10 {
            return Err(Error::NotAntisymmetric {
                index: 0,
                residual: self.max_antisymmetry,
            });
        }
        if self.min_pivot <= 1e-10 {
            return Err(Error::Dependent { pivot: self.min_pivot });
        }
        Err(Error::NotHType {
            witness: self.witness.unwrap_or_default(),
            residual: self.max_residual,
        })
    }
}

/// Point `(x, z)` of the group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint<T> {
    pub x: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Real> GroupPoint<T> {
    pub fn new(x: Vec<T>, z: Vec<T>) -> Result<Self> {
        if x.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("group point has non-finite entries".into()));
        }
        Ok(Self { x, z })
    }

    pub fn identity(d: usize, m: usize) -> Self {
        Self {
            x: vec![T::zero(); 2 * d],
            z: vec![T::zero(); m],
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            x: self.x.iter().map(|&v| -v).collect(),
            z: self.z.iter().map(|&v| -v).collect(),
        }
    }

    /// Anisotropic dilation `(Lx, L^2 z)`.
    pub fn dilate(&self, scale: T) -> Result<Self> {
        if !(scale > T::zero()) {
            return Err(Error::NonPositive {
                what: "dilation factor",
                value: to_f64(scale),
            });
        }
        Ok(Self {
            x: self.x.iter().map(|&v| v * scale).collect(),
            z: self.z.iter().map(|&v| v * scale * scale).collect(),
        })
    }

    /// Largest coordinate difference.
    pub fn distance_sup(&self, other: &Self) -> T {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.z.iter().zip(&other.z))
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Nonzero element of the dual of the vertical layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualFrequency<T> {
    lambda: Vec<T>,
}

impl<T: Real> DualFrequency<T> {
    pub fn new(lambda: Vec<T>) -> Result<Self> {
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite dual frequency".into()));
        }
        if norm2(&lambda) == T::zero() {
            return Err(Error::ZeroFrequency);
        }
        Ok(Self { lambda })
    }

    /// Scalar frequency for `m = 1`.
    pub fn scalar(lambda: T) -> Result<Self> {
        Self::new(vec![lambda])
    }

    /// Frequency `rho * omega` from polar coordinates.
    pub fn polar(rho: T, omega: &[T]) -> Result<Self> {
        Self::new(omega.iter().map(|&w| rho * w).collect())
    }

    pub fn components(&self) -> &[T] {
        &self.lambda
    }

    /// `|lambda|`.
    pub fn rho(&self) -> T {
        norm2(&self.lambda)
    }

    /// `lambda / |lambda|`.
    pub fn omega(&self) -> Vec<T> {
        let r = self.rho();
        self.lambda.iter().map(|&v| v / r).collect()
    }

    pub fn neg(&self) -> Self {
        Self {
            lambda: self.lambda.iter().map(|&v| -v).collect(),
        }
    }

    pub fn dot(&self, z: &[T]) -> T {
        dot(&self.lambda, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], z: &[f64]) -> GroupPoint<f64> {
        GroupPoint::new(x.to_vec(), z.to_vec()).unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let p = pt(&[0.3, -1.2], &[0.7]);
        let e = GroupPoint::identity(1, 1);
        assert_eq!(h.multiply(&p, &e).unwrap(), p);
    }

    #[test]
    fn heisenberg_product_example() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let q = h.multiply(&pt(&[1.0, 0.0], &[0.0]), &pt(&[0.0, 1.0], &[0.0])).unwrap();
        assert_eq!(q, pt(&[1.0, 1.0], &[0.5]));
    }

    #[test]
    fn dilation_examples() {
        let p = pt(&[1.0, 0.0], &[1.0]);
        assert_eq!(p.dilate(1.0).unwrap(), p);
        assert_eq!(p.dilate(2.0).unwrap(), pt(&[2.0, 0.0], &[4.0]));
        assert!(p.dilate(0.0).is_err());
        assert!(p.dilate(-1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        assert!(h.multiply(&pt(&[1.0, 0.0, 0.0], &[0.0]), &pt(&[0.0, 1.0], &[0.0])).is_err());
    }

    #[test]
    fn heisenberg_j_map() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let j = h.j_map(&DualFrequency::scalar(1.0).unwrap()).unwrap();
        assert_eq!(j.as_slice(), &[0.0, -1.0, 1.0, 0.0]);
        assert!(DualFrequency::<f64>::scalar(0.0).is_err());
    }

    #[test]
    fn heisenberg_rotation_is_identity() {
        let h = HTypeStructure::<f64>::heisenberg(2).unwrap();
        for lam in [0.3, 1.0, 7.5] {
            let t = h.diagonalize_j(&DualFrequency::scalar(lam).unwrap()).unwrap();
            assert_eq!(t, Mat::identity(4));
        }
        let p = pt(&[0.1, 0.2, 0.3, 0.4], &[0.5]);
        let q = h.to_heisenberg(&p, &DualFrequency::scalar(3.0).unwrap()).unwrap();
        assert_eq!(q, p);
        let e = GroupPoint::identity(2, 1);
        assert_eq!(h.to_heisenberg(&e, &DualFrequency::scalar(3.0).unwrap()).unwrap(), e);
    }

    #[test]
    fn validation_outcomes() {
        let h = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let r = h.validate(DEFAULT_VALIDATION_SAMPLES, 1);
        assert!(r.passed);
        assert_eq!(r.max_residual, 0.0);
        let q = HTypeStructure::<f64>::quaternionic(2).unwrap();
        assert!(q.validate(DEFAULT_VALIDATION_SAMPLES, 2).passed);

        let mut l = q.brackets()[0].clone();
        l[(0, 2)] += 0.1;
        l[(2, 0)] -= 0.1;
        let mut ls = q.brackets().to_vec();
        ls[0] = l;
        let bad = HTypeStructure::new(2, ls).unwrap();
        let r = bad.validate(DEFAULT_VALIDATION_SAMPLES, 3);
        assert!(!r.passed);
        assert!(r.max_residual > 1e-3);
        let w = r.witness.clone().expect("witness");
        assert_eq!(w.len(), 3);
        assert!(matches!(r.into_result(), Err(Error::NotHType { .. })));
    }

    #[test]
    fn json_round_trip_and_default() {
        let s: HTypeStructure<f64> = serde_json::from_str(r#"{"d": 2}"#).unwrap();
        assert!(s.is_heisenberg());
        let q = HTypeStructure::<f64>::quaternionic(2).unwrap();
        let txt = serde_json::to_string(&q).unwrap();
        let back: HTypeStructure<f64> = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<HTypeStructure<f64>>(r#"{"d": 1, "m": 3}"#).is_err());
        assert!(serde_json::from_str::<HTypeStructure<f64>>(r#"{"d": 1, "L": [[0,1,-1]]}"#).is_err());
    }

    #[test]
    fn f32_structure_works() {
        let h = HTypeStructure::<f32>::heisenberg(1).unwrap();
        let p = GroupPoint::new(vec![1.0f32, 0.0], vec![0.0]).unwrap();
        let q = GroupPoint::new(vec![0.0f32, 1.0], vec![0.0]).unwrap();
        assert_eq!(h.multiply(&p, &q).unwrap().z, vec![0.5f32]);
    }
}
