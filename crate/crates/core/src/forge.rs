//! Rank-one construction of single-violation instances.
//!
//! Starting from a P-matrix `M` with smallest principal minor `f_M` at
//! `α*`, pick `u` supported on `α*` and `v̂ = −M_{α*}⁻¹ u` so that
//! `s = v̂ᵀ M_{α*}⁻¹ u < 0`. Along `A(λ) = M + λ u v̂ᵀ` the `α*` minor is
//! `det(M_{α*})(1 + λ s)`, which crosses zero at `λ = −1/s`. The scan then
//! looks for a `λ` past the crossing where exactly one minor is `≤ 0`.

// `!(x < 0.0)` style guards below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::mask::SubsetMask;
use crate::matrix::Matrix;
use crate::minors::{self, Regime, ViolationReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForgeConfig {
    /// Target magnitude of the `α*` minor after perturbation.
    pub epsilon: f64,
    pub lambda_search_steps: usize,
    /// Upper end of the scan as a multiple of the solved `λ₀`.
    pub max_lambda_factor: f64,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        Self { epsilon: 1e-3, lambda_search_steps: 64, max_lambda_factor: 1.0 }
    }
}

impl ForgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.lambda_search_steps == 0 {
            return Err(Error::InvalidArgument("lambda_search_steps must be >= 1".into()));
        }
        if !(self.max_lambda_factor > 0.0 && self.max_lambda_factor.is_finite()) {
            return Err(Error::InvalidArgument("max_lambda_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForgeResult {
    /// `M`, `u`, and `v = λ·v̂`.
    pub instance: Instance,
    pub witness: SubsetMask,
    pub witness_value: f64,
    pub lambda: f64,
    pub lambda0: f64,
    pub alpha_star: SubsetMask,
    pub f_m: f64,
    pub s: f64,
    pub epsilon: f64,
    /// Report for the forged matrix, as computed during the scan.
    pub report: ViolationReport,
}

/// `(α*, f_M)`; ties go to the smallest mask.
pub fn find_min_minor(m: &Matrix) -> Result<(SubsetMask, f64)> {
    let rep = minors::violation_set(m, 0.0)?;
    if let Some(v) = rep.violations.first() {
        return Err(Error::NotPMatrix { subset: v.alpha.to_string(), value: v.value });
    }
    Ok((rep.min_minor.alpha, rep.min_minor.value))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Directions {
    pub u: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// `v̂ᵀ M_{α*}⁻¹ u`, strictly negative.
    pub s: f64,
}

/// `u = 1` on `α*`, `v̂_{α*} = −M_{α*}⁻¹ u_{α*}`, both zero elsewhere.
pub fn choose_directions(m: &Matrix, alpha_star: &SubsetMask) -> Result<Directions> {
    let sub = m.principal_submatrix(alpha_star)?;
    let ones = vec![1.0; alpha_star.len()];
    let t = sub.solve(&ones)?;
    let s = -t.iter().map(|x| x * x).sum::<f64>();
    if !(s < 0.0) {
        return Err(Error::InvalidArgument(format!("direction product s = {s} is not negative")));
    }
    let n = m.n();
    let mut u = vec![0.0; n];
    let mut v_hat = vec![0.0; n];
    for (k, i) in alpha_star.indices().enumerate() {
        u[i] = 1.0;
        v_hat[i] = -t[k];
    }
    Ok(Directions { u, v_hat, s })
}

/// Positive root of `det_ma·(1 + λ s) = −ε`.
pub fn solve_lambda(det_ma: f64, s: f64, epsilon: f64) -> Result<f64> {
    if !(det_ma > 0.0) || !(s < 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need det_ma > 0, s < 0, epsilon >= 0 (got {det_ma}, {s}, {epsilon})"
        )));
    }
    Ok((1.0 + epsilon / det_ma) / -s)
}

/// Scan grid: `steps` geometric points from `top` down toward (but not
/// reaching) `bottom`.
pub fn lambda_grid(bottom: f64, top: f64, steps: usize) -> Vec<f64> {
    let ratio = top / bottom;
    (0..steps).map(|i| bottom * ratio.powf((steps - i) as f64 / steps as f64)).collect()
}

pub fn forge_single_violation(m: &Matrix, cfg: &ForgeConfig) -> Result<ForgeResult> {
    cfg.validate()?;
    let (alpha_star, f_m) = find_min_minor(m)?;
    let dirs = choose_directions(m, &alpha_star)?;
    let lambda0 = solve_lambda(f_m, dirs.s, cfg.epsilon)?;
    let lambda_min = 1.0 / -dirs.s;
    let lambda_max = lambda0 * cfg.max_lambda_factor;
    if !(lambda_max > lambda_min) {
        return Err(Error::InvalidArgument(format!(
            "scan range empty: lambda_max {lambda_max} <= onset {lambda_min}"
        )));
    }

    let mut counts = Vec::with_capacity(cfg.lambda_search_steps);
    for lambda in lambda_grid(lambda_min, lambda_max, cfg.lambda_search_steps) {
        let v: Vec<f64> = dirs.v_hat.iter().map(|x| lambda * x).collect();
        let a = m.add_outer(&dirs.u, &v)?;
        let report = minors::violation_set(&a, 0.0)?;
        counts.push(report.violations.len());
        if report.regime == Regime::SingleViolation && report.violations[0].value < 0.0 {
            let rec = report.violations[0];
            return Ok(ForgeResult {
                instance: Instance::new(m.clone(), dirs.u.clone(), v)?,
                witness: rec.alpha,
                witness_value: rec.value,
                lambda,
                lambda0,
                alpha_star,
                f_m,
                s: dirs.s,
                epsilon: cfg.epsilon,
                report,
            });
        }
    }
    Err(Error::ForgeFailed { lambda_min, lambda_max, counts })
}

/// `det(A(λ)_{α*})` through the determinant lemma.
pub fn alpha_star_minor(f_m: f64, s: f64, lambda: f64) -> f64 {
    f_m * (1.0 + lambda * s)
}

/// Random strictly row-diagonally-dominant base with positive diagonal
/// (hence a P-matrix). Off-diagonal entries are skew-symmetric, uniform on
/// `[−1, 1]`; each diagonal entry is its row's off-diagonal absolute sum
/// times a factor uniform on `[1.05, 1.5]`. A symmetric off-diagonal
/// component lowers the forge success rate markedly, so there is none.
pub fn random_dominant_base(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let k: f64 = rng.random_range(-1.0..=1.0);
            d[i * n + j] = k;
            d[j * n + i] = -k;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| d[i * n + j].abs()).sum();
        let factor: f64 = rng.random_range(1.05..=1.5);
        d[i * n + i] = if off > 0.0 { off * factor } else { factor };
    }
    Matrix::new(n, d).expect("finite")
}

const FIXTURE_M: [[f64; 6]; 6] = [
    [2.3, -4.8, -1.9, 0.0, 0.0, 1.3],
    [2.6, 3.4, 3.8, 0.0, 0.0, 2.6],
    [-2.6, 4.8, 6.7, -1.1, 1.3, -1.3],
    [1.3, 2.4, -3.8, 5.4, 0.0, -1.3],
    [-2.6, 4.8, 0.0, -1.1, 4.9, -1.3],
    [0.0, -4.8, -1.9, 0.0, -2.6, 7.5],
];
const FIXTURE_U: [f64; 6] = [0.25, 0.0, 0.0, 0.0, 2.0, 0.0];
const FIXTURE_V: [f64; 6] = [-1.740695, 0.0, 0.0, 0.0, -1.740695, 0.0];

/// The 6×6 worked example: a P-matrix whose rank-one perturbation has the
/// single violating subset `{1,5}`.
pub fn appendix_b_fixture() -> Instance {
    let m = Matrix::new(6, FIXTURE_M.iter().flatten().copied().collect()).expect("fixture is valid");
    Instance::new(m, FIXTURE_U.to_vec(), FIXTURE_V.to_vec()).expect("fixture is valid")
}

/// Checked-in copy of the fixture in the instance file format.
pub const APPENDIX_B_JSON: &str = include_str!("../fixtures/appendix_b.json");

/// Neighborhood table around `{1,5}`: (row number, one-based subset,
/// printed minor of the perturbed matrix).
pub const TABLE_ONE: [(usize, &[usize], f64); 15] = [
    (1, &[1], 1.865),
    (2, &[1, 2], 18.820),
    (3, &[1, 3], 7.554),
    (4, &[1, 4], 10.070),
    (5, &[1, 5], -0.001),
    (6, &[1, 6], 13.986),
    (7, &[5], 1.419),
    (8, &[2, 5], 4.823),
    (9, &[3, 5], 9.505),
    (10, &[4, 5], 7.660),
    (11, &[5, 6], 7.260),
    (12, &[1, 2, 5], 12.270),
    (13, &[1, 3, 5], 8.006),
    (14, &[1, 4, 5], 0.617),
    (15, &[1, 5, 6], 14.244),
];

/// Printed-value tolerance for the fixture table.
pub const TABLE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub row: usize,
    pub subset: SubsetMask,
    pub printed: f64,
    pub computed: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixtureCheck {
    pub name: &'static str,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixtureReport {
    pub rows: Vec<TableRow>,
    pub checks: Vec<FixtureCheck>,
    pub all_pass: bool,
}

/// Recomputes the neighborhood table and the headline numbers of the 6×6
/// example.
pub fn reproduce_fixture() -> Result<FixtureReport> {
    let inst = appendix_b_fixture();
    let a = inst.perturbed();
    let n = inst.n();
    let rows = TABLE_ONE
        .iter()
        .map(|&(row, idx, printed)| {
            let subset = SubsetMask::from_one_based(idx, n)?;
            let computed = a.principal_minor(&subset)?;
            // printed to three decimals; allow for the rounding itself
            let pass = (computed - printed).abs() <= TABLE_TOL + 1e-12;
            Ok(TableRow { row, subset, printed, computed, pass })
        })
        .collect::<Result<Vec<_>>>()?;

    let base = minors::violation_set(inst.m(), 0.0)?;
    let perturbed = minors::violation_set(&a, 0.0)?;
    let w15 = SubsetMask::from_one_based(&[1, 5], n)?;
    let w234 = SubsetMask::from_one_based(&[2, 3, 4], n)?;
    let d15 = inst.m().principal_minor(&w15)?;
    let mut checks = vec![
        FixtureCheck {
            name: "base minors positive",
            expected: "63 of 63".into(),
            observed: format!("{} of {}", base.total_minors - base.violations.len() as u64, base.total_minors),
            pass: base.violations.is_empty() && base.total_minors == 63,
        },
        FixtureCheck {
            name: "base minimum minor",
            expected: "0.272 +- 0.001 at {2,3,4}".into(),
            observed: format!("{:.6} at {}", base.min_minor.value, base.min_minor.alpha),
            pass: base.min_minor.alpha == w234 && (base.min_minor.value - 0.272).abs() <= 1e-3,
        },
        FixtureCheck {
            name: "base minor {1,5}",
            expected: "11.27 +- 0.005".into(),
            observed: format!("{d15:.6}"),
            pass: (d15 - 11.27).abs() <= 5e-3,
        },
    ];
    let (observed, pass) = match perturbed.violations.as_slice() {
        [only] => (
            format!("{} = {:.6}", only.alpha, only.value),
            only.alpha == w15 && (-0.0015..=-0.0005).contains(&only.value),
        ),
        many => (format!("{} violations", many.len()), false),
    };
    checks.push(FixtureCheck {
        name: "unique violation",
        expected: "{1,5} in [-0.0015, -0.0005]".into(),
        observed,
        pass,
    });
    let all_pass = rows.iter().all(|r| r.pass) && checks.iter().all(|c| c.pass);
    Ok(FixtureReport { rows, checks, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::det_lemma_update;

    #[test]
    fn fixture_file_matches_code() {
        assert_eq!(Instance::from_json(APPENDIX_B_JSON).unwrap(), appendix_b_fixture());
    }

    #[test]
    fn fixture_values() {
        let inst = appendix_b_fixture();
        let w = SubsetMask::from_one_based(&[1, 5], 6).unwrap();
        assert!((inst.m().principal_minor(&w).unwrap() - 11.27).abs() < 1e-12);
        let d = inst.perturbed().principal_minor(&w).unwrap();
        assert!((-0.0015..=-0.0005).contains(&d));
        let rep = minors::violation_set(&inst.perturbed(), 0.0).unwrap();
        assert_eq!(rep.witness(), Some(w));
    }

    #[test]
    fn fixture_reproduction_passes() {
        let r = reproduce_fixture().unwrap();
        assert!(r.all_pass, "{r:#?}");
        assert_eq!(r.rows.len(), 15);
        let row = |k: usize| &r.rows[k - 1];
        assert_eq!((row(5).subset.to_string(), row(5).printed), ("{1,5}".to_string(), -0.001));
        assert_eq!((row(2).subset.to_string(), row(2).printed), ("{1,2}".to_string(), 18.820));
        assert_eq!((row(11).subset.to_string(), row(11).printed), ("{5,6}".to_string(), 7.260));
    }

    #[test]
    fn min_minor_examples() {
        let (a, f) = find_min_minor(appendix_b_fixture().m()).unwrap();
        assert_eq!(a.one_based(), vec![2, 3, 4]);
        assert!((f - 0.272).abs() < 1e-3);
        let (a, f) = find_min_minor(&Matrix::identity(4)).unwrap();
        assert_eq!((a.one_based(), f), (vec![1], 1.0));
        // minors of [[2,3],[1,2]]: {1}=2, {2}=2, {1,2}=4-3=1
        let m = Matrix::from_rows(&[vec![2.0, 3.0], vec![1.0, 2.0]]).unwrap();
        let (a, f) = find_min_minor(&m).unwrap();
        assert_eq!(a.one_based(), vec![1, 2]);
        assert!((f - 1.0).abs() < 1e-15);
        let neg = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(find_min_minor(&neg), Err(Error::NotPMatrix { .. })));
    }

    #[test]
    fn directions_on_identity_block() {
        let m = Matrix::identity(4);
        let alpha = SubsetMask::from_one_based(&[2, 3], 4).unwrap();
        let d = choose_directions(&m, &alpha).unwrap();
        assert_eq!(d.u, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(d.v_hat, vec![0.0, -1.0, -1.0, 0.0]);
        assert_eq!(d.s, -2.0);
    }

    #[test]
    fn directions_negative_and_supported() {
        let m = appendix_b_fixture().m().clone();
        let (alpha, _) = find_min_minor(&m).unwrap();
        let d = choose_directions(&m, &alpha).unwrap();
        assert!(d.s < 0.0);
        for i in 0..6 {
            if !alpha.contains(i) {
                assert_eq!((d.u[i], d.v_hat[i]), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn lambda_closed_form() {
        assert_eq!(solve_lambda(1.0, -1.0, 0.0).unwrap(), 1.0);
        assert_eq!(solve_lambda(2.0, -0.5, 1.0).unwrap(), 3.0);
        assert!(solve_lambda(-1.0, -1.0, 1.0).is_err());
        assert!(solve_lambda(1.0, 0.5, 1.0).is_err());
        assert!(solve_lambda(1.0, -0.5, -1.0).is_err());
        for (d, s, e) in [(0.272, -3.1, 1e-3), (11.27, -0.02, 0.5), (1.0, -1.0, 1e-6)] {
            let l = solve_lambda(d, s, e).unwrap();
            let back = det_lemma_update(d, &[s], &[1.0], l);
            assert!(((back + e) / e).abs() < 1e-9, "{back}");
        }
    }

    #[test]
    fn forge_fixture_base() {
        let m = appendix_b_fixture().m().clone();
        let r = forge_single_violation(&m, &ForgeConfig::default()).unwrap();
        assert_eq!(r.report.regime, Regime::SingleViolation);
        assert!(r.witness_value < 0.0);
        let fresh = minors::violation_set(&r.instance.perturbed(), 0.0).unwrap();
        assert_eq!(fresh, r.report);
        assert_eq!(r.instance.m(), &m);
        // determinant-lemma consistency at α*
        let direct = r.instance.perturbed().principal_minor(&r.alpha_star).unwrap();
        let lemma = alpha_star_minor(r.f_m, r.s, r.lambda);
        assert!((direct - lemma).abs() <= 1e-9 * direct.abs().max(1e-300) || (direct - lemma).abs() < 1e-12);
    }

    #[test]
    fn forge_identity_fails_with_counts() {
        // u = e1 drives a11 below zero and with it every minor containing 1.
        let err = forge_single_violation(&Matrix::identity(4), &ForgeConfig::default()).unwrap_err();
        match err {
            Error::ForgeFailed { counts, .. } => {
                assert_eq!(counts.len(), 64);
                assert!(counts.iter().all(|&c| c == 8));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn forge_rejects_non_p_and_bad_config() {
        let neg = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            forge_single_violation(&neg, &ForgeConfig::default()),
            Err(Error::NotPMatrix { .. })
        ));
        let bad = ForgeConfig { epsilon: 0.0, ..Default::default() };
        assert!(forge_single_violation(&Matrix::identity(2), &bad).is_err());
        let bad = ForgeConfig { lambda_search_steps: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn alpha_star_minor_decreases_along_grid() {
        let m = appendix_b_fixture().m().clone();
        let (alpha, f_m) = find_min_minor(&m).unwrap();
        let d = choose_directions(&m, &alpha).unwrap();
        let l0 = solve_lambda(f_m, d.s, 1e-3).unwrap();
        let grid = lambda_grid(1.0 / -d.s, l0, 64);
        assert!(grid.windows(2).all(|w| w[0] > w[1]));
        let vals: Vec<f64> = grid
            .iter()
            .map(|&l| {
                let v: Vec<f64> = d.v_hat.iter().map(|x| l * x).collect();
                m.add_outer(&d.u, &v).unwrap().principal_minor(&alpha).unwrap()
            })
            .collect();
        // grid descends in λ, so minors ascend
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        assert!(vals.iter().all(|&x| x < 0.0));
    }
}
