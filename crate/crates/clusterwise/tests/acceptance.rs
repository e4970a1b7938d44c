//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::process::ExitCode;

use clusterwise::config::McSection;
use clusterwise::montecarlo::{ks_p_value, ks_statistic, simulate, McConfig, McReport, Simulation};
use clusterwise::report::write_mc_outputs;
use clusterwise::scenarios::lookup;
use clusterwise_core::data::{build_dataset, ClusterBlock, ClusteredDataset};
use clusterwise_core::distributions::{chi2_quantile, normal_cdf};
use clusterwise_core::estimators::{fit_averaged, fit_pooled, EstimatorKind, FitResult};
use clusterwise_core::inference::{wald_statistic, LinearHypothesis};
use clusterwise_core::Matrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const R: usize = 2000;
const SLOPE: usize = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(name: &str, replications: usize) -> Simulation {
    let cfg = McConfig::new(lookup(name).expect("catalog name"), replications, SEED);
    simulate(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn report(name: &str) -> McReport {
    run(name, R).report
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn size(r: &McReport, k: EstimatorKind) -> f64 {
    r.estimator(k).empirical_size.expect("null statistics exist")
}

fn c01_balanced_size() -> Outcome {
    let r = report("table2:G500");
    let (a, p) = (size(&r, EstimatorKind::Averaged), size(&r, EstimatorKind::Pooled));
    outcome(
        in_range(a, 0.040, 0.070) && in_range(p, 0.037, 0.068),
        format!("averaged size {a}, pooled size {p}"),
    )
}

fn c02_scaled_size() -> Outcome {
    let r = report("table3:G500");
    let (a, p) = (size(&r, EstimatorKind::Averaged), size(&r, EstimatorKind::Pooled));
    outcome(
        in_range(a, 0.038, 0.063) && in_range(p, 0.038, 0.063),
        format!("averaged size {a}, pooled size {p}"),
    )
}

fn c03_unbalanced_size() -> Outcome {
    let r = report("table4:G50N500");
    let (a, p) = (size(&r, EstimatorKind::Averaged), size(&r, EstimatorKind::Pooled));
    outcome(
        in_range(a, 0.03, 0.07) && p > 0.80,
        format!("averaged size {a}, pooled size {p}"),
    )
}

fn c04_unbalanced_mse() -> Outcome {
    let r = report("table4:G25N500");
    let ratio = r.estimator(EstimatorKind::Averaged).mse[SLOPE] / r.estimator(EstimatorKind::Pooled).mse[SLOPE];
    outcome(ratio < 0.35, format!("MSE ratio averaged/pooled {ratio:.4}"))
}

fn c05_large_cluster_growth() -> Outcome {
    let small = report("table4:G25N250");
    let big = report("table4:G100N1000");
    let drop = |k| {
        let (m0, m1) = (small.estimator(k).mse[SLOPE], big.estimator(k).mse[SLOPE]);
        (m0 - m1) / m0
    };
    let (p, a) = (drop(EstimatorKind::Pooled), drop(EstimatorKind::Averaged));
    outcome(
        p < 0.5 && a > 0.5,
        format!("MSE decrease G=25 -> 100: pooled {p:.3}, averaged {a:.3}"),
    )
}

fn c06_variance_rate() -> Outcome {
    let g200 = report("table3:G200");
    let g400 = report("table3:G400");
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [EstimatorKind::Averaged, EstimatorKind::Pooled] {
        let v = |r: &McReport| r.estimator(k).mc_cov[(SLOPE, SLOPE)];
        let ratio = v(&g400) / v(&g200);
        pass &= in_range(ratio, 0.35, 0.75);
        parts.push(format!("{} {ratio:.3}", k.as_str()));
    }
    outcome(pass, format!("Var(G=400)/Var(G=200): {}", parts.join(", ")))
}

fn c07_oracle_wald_ks() -> Outcome {
    let sim = run("table2:G200", 5000);
    let stats: Vec<f64> = sim.draws.iter().filter_map(|d| d.oracle_stat).collect();
    let chi2_1 = |x: f64| if x <= 0.0 { 0.0 } else { 2.0 * normal_cdf(x.sqrt()) - 1.0 };
    let d = ks_statistic(&stats, chi2_1);
    let p = ks_p_value(d, stats.len());
    outcome(
        stats.len() == 5000 && p > 0.01,
        format!("KS D={d:.4}, p={p:.3}, n={}", stats.len()),
    )
}

fn c08_vhat_calibration() -> Outcome {
    let r = report("table2:G500");
    let mut pass = true;
    let mut parts = Vec::new();
    for e in &r.estimators {
        let err = e.vhat_rel_error.expect("fixed design");
        pass &= err < 0.15;
        parts.push(format!("{} {err:.4}", e.estimator.as_str()));
    }
    outcome(pass, format!("|mean Vhat - V|_F / |V|_F: {}", parts.join(", ")))
}

fn c09_measurement_error() -> Outcome {
    let weak = report("me:weak");
    let strong = report("me:strong");
    let oracle_bias = weak.measurement_error.as_ref().expect("oracle").oracle_bias[SLOPE];
    let bp = weak.estimator(EstimatorKind::Pooled).bias[SLOPE];
    let ba = weak.estimator(EstimatorKind::Averaged).bias[SLOPE];
    let sa = strong.estimator(EstimatorKind::Averaged);
    let weak_ok = (bp - oracle_bias).abs() < 0.2 * oracle_bias.abs() && ba.abs() < 0.25 * bp.abs();
    let strong_ok = sa.bias[SLOPE].abs() > 3.0 * sa.bias_mc_se[SLOPE];
    outcome(
        weak_ok && strong_ok,
        format!(
            "weak: pooled {bp:.5} vs oracle {oracle_bias:.5}, averaged {ba:.5}; strong: averaged {:.5} (se {:.5})",
            sa.bias[SLOPE], sa.bias_mc_se[SLOPE]
        ),
    )
}

fn c10_efficiency() -> Outcome {
    let r = report("efficiency");
    let ratio = r.estimator(EstimatorKind::Pooled).mc_cov[(SLOPE, SLOPE)]
        / r.estimator(EstimatorKind::Averaged).mc_cov[(SLOPE, SLOPE)];
    outcome(ratio > 1.5, format!("Var(pooled)/Var(averaged) {ratio:.3}"))
}

fn c11_worker_determinism() -> Outcome {
    let section = McSection {
        scenario: Some("table4:G25N500".into()),
        replications: Some(300),
        seed: Some(SEED),
        ..McSection::default()
    };
    let mut outputs = Vec::new();
    for workers in [1, 2, 8] {
        let mut cfg = section.resolve().expect("valid section");
        cfg.workers = workers;
        let rep = simulate(&cfg).expect("simulation").report;
        let dir = tempfile::tempdir().expect("tempdir");
        let files = write_mc_outputs(dir.path(), &rep).expect("write");
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).expect("read back")).collect();
        outputs.push(bytes);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("{} files compared across workers 1, 2, 8", outputs[0].len()))
}

// Exact rational arithmetic for the brute-force oracle.

type Q = BigRational;
type QMat = Vec<Vec<Q>>;

fn q(x: f64) -> Q {
    Q::from_float(x).expect("finite")
}

fn qmat(m: &Matrix) -> QMat {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&v| q(v)).collect()).collect()
}

fn mat_mul(a: &QMat, b: &QMat) -> QMat {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..p).map(|j| (0..m).fold(Q::zero(), |s, l| s + &a[i][l] * &b[l][j])).collect())
        .collect()
}

fn transpose(a: &QMat) -> QMat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// Gauss-Jordan inverse; `None` when singular.
fn inverse(a: &QMat) -> Option<QMat> {
    let n = a.len();
    let mut m: QMat = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, p);
        let pivot = m[c][c].clone();
        for v in m[c].iter_mut() {
            *v = &*v / &pivot;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                let pivot_row = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

struct Exact {
    beta: Vec<Q>,
    cov: QMat,
}

/// OLS with the cluster sandwich, one "cluster" per entry of `groups`.
fn exact_sandwich(groups: &[(QMat, Vec<Q>)]) -> Option<Exact> {
    let x: QMat = groups.iter().flat_map(|(x, _)| x.clone()).collect();
    let y: Vec<Q> = groups.iter().flat_map(|(_, y)| y.clone()).collect();
    let xt = transpose(&x);
    let bread = inverse(&mat_mul(&xt, &x))?;
    let xty: QMat = mat_mul(&xt, &y.iter().map(|v| vec![v.clone()]).collect());
    let beta: Vec<Q> = mat_mul(&bread, &xty).into_iter().map(|r| r[0].clone()).collect();
    let k = beta.len();
    let mut meat = vec![vec![Q::zero(); k]; k];
    for (xg, yg) in groups {
        let mut s = vec![Q::zero(); k];
        for (row, yv) in xg.iter().zip(yg) {
            let fitted = row.iter().zip(&beta).fold(Q::zero(), |a, (x, b)| a + x * b);
            let u = yv - fitted;
            for (sj, xj) in s.iter_mut().zip(row) {
                *sj += xj * &u;
            }
        }
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += &s[a] * &s[b];
            }
        }
    }
    let cov = mat_mul(&mat_mul(&bread, &meat), &bread);
    Some(Exact { beta, cov })
}

fn exact_pooled(ds: &ClusteredDataset) -> Option<Exact> {
    let groups: Vec<(QMat, Vec<Q>)> = ds
        .blocks()
        .iter()
        .map(|b| (qmat(b.x()), b.y().iter().map(|&v| q(v)).collect()))
        .collect();
    exact_sandwich(&groups)
}

fn exact_averaged(ds: &ClusteredDataset) -> Option<Exact> {
    let groups: Vec<(QMat, Vec<Q>)> = ds
        .blocks()
        .iter()
        .map(|b| {
            let n = Q::from_integer(BigInt::from(b.len()));
            let xq = qmat(b.x());
            let xbar: Vec<Q> = (0..b.n_params())
                .map(|j| xq.iter().fold(Q::zero(), |s, r| s + &r[j]) / &n)
                .collect();
            let ybar = b.y().iter().fold(Q::zero(), |s, &v| s + q(v)) / &n;
            (vec![xbar], vec![ybar])
        })
        .collect();
    exact_sandwich(&groups)
}

fn exact_wald(e: &Exact, r: &QMat, rhs: &[Q]) -> Option<Q> {
    let b: QMat = e.beta.iter().map(|v| vec![v.clone()]).collect();
    let diff: QMat = mat_mul(r, &b)
        .into_iter()
        .zip(rhs)
        .map(|(row, c)| vec![&row[0] - c])
        .collect();
    let middle = inverse(&mat_mul(&mat_mul(r, &e.cov), &transpose(r)))?;
    Some(mat_mul(&mat_mul(&transpose(&diff), &middle), &diff)[0][0].clone())
}

fn to_f64(v: &Q) -> f64 {
    v.to_f64().expect("representable")
}

/// Largest entrywise gap relative to the largest exact entry.
fn rel_gap(got: &[f64], exact: &[Q]) -> f64 {
    let scale = exact.iter().map(|v| v.abs()).max().map(|v| to_f64(&v)).unwrap_or(0.0);
    let gap = got
        .iter()
        .zip(exact)
        .map(|(g, e)| (g - to_f64(e)).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        gap
    } else {
        gap / scale
    }
}

fn random_dataset(rng: &mut ChaCha8Rng) -> ClusteredDataset {
    let k = rng.random_range(1..=3usize);
    let g = rng.random_range((k + 1).max(2)..=5usize);
    let blocks = (0..g)
        .map(|c| {
            let n = rng.random_range(1..=6usize);
            let mut x = Vec::with_capacity(n * k);
            for _ in 0..n {
                x.push(1.0);
                x.extend((1..k).map(|_| rng.random_range(-3.0..3.0)));
            }
            let y = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            ClusterBlock::new(c.to_string(), Matrix::from_row_major(n, k, x).unwrap(), y).unwrap()
        })
        .collect();
    build_dataset(blocks).unwrap()
}

fn compare(fit: &FitResult, exact: &Exact, hyp: &LinearHypothesis, r: &QMat, rhs: &[Q]) -> f64 {
    let mut worst = rel_gap(&fit.beta, &exact.beta);
    let flat_exact: Vec<Q> = exact.cov.iter().flatten().cloned().collect();
    worst = worst.max(rel_gap(fit.cov.as_slice(), &flat_exact));
    if let (Ok(stat), Some(w)) = (wald_statistic(&fit.beta, &fit.cov, hyp), exact_wald(exact, r, rhs)) {
        let w = to_f64(&w);
        worst = worst.max((stat - w).abs() / w.abs().max(1e-300));
    }
    worst
}

fn c12_rational_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for _ in 0..100 {
        let ds = random_dataset(&mut rng);
        let k = ds.n_params();
        let j = k - 1;
        let hyp = LinearHypothesis::coefficient(k, j, 0.0).unwrap();
        let mut row = vec![Q::zero(); k];
        row[j] = Q::one();
        let (rq, rhs) = (vec![row], vec![Q::zero()]);
        for (fit, exact) in [
            (fit_pooled(&ds), exact_pooled(&ds)),
            (fit_averaged(&ds), exact_averaged(&ds)),
        ] {
            match (fit, exact) {
                (Ok(f), Some(e)) => {
                    worst = worst.max(compare(&f, &e, &hyp, &rq, &rhs));
                    checked += 1;
                }
                (Err(_), None) => {}
                (Ok(_), None) => return outcome(false, "fit succeeded on an exactly singular design".into()),
                // Numerically rank-deficient designs may be refused.
                (Err(_), Some(_)) => {}
            }
        }
    }
    outcome(
        worst < 1e-8 && checked >= 150,
        format!("{checked} fits, worst relative gap {worst:.2e}"),
    )
}

/// Chi-square density integrated with adaptive Simpson after `x = t^2`,
/// which removes the singularity at zero for one degree of freedom.
fn chi2_cdf_by_integration(x: f64, l: u32) -> f64 {
    let half = l as f64 / 2.0;
    // Gamma at integers and half-integers.
    let gamma = {
        let mut g = if l % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
        let mut a = if l % 2 == 0 { 1.0 } else { 0.5 };
        while a < half {
            g *= a;
            a += 1.0;
        }
        g
    };
    let c = 1.0 / (2f64.powf(half) * gamma);
    let f = |t: f64| 2.0 * c * t.powf(l as f64 - 1.0) * (-t * t / 2.0).exp();
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let b = x.sqrt();
    let (fa, fm, fb) = (f(0.0), f(b / 2.0), f(b));
    let whole = b / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, 0.0, b, fa, fm, fb, whole, 1e-13, 50)
}

fn c13_chi2_quantiles() -> Outcome {
    let mut worst = 0.0f64;
    for l in 1..=10u32 {
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if chi2_cdf_by_integration(mid, l) < 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = (lo + hi) / 2.0;
        let got = chi2_quantile(0.95, l).expect("valid arguments");
        worst = worst.max((got - oracle).abs());
    }
    outcome(worst < 1e-4, format!("worst |q - oracle| {worst:.2e} over l = 1..10"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("c01 balanced random-strong size", c01_balanced_size),
        ("c02 balanced scaled size", c02_scaled_size),
        ("c03 one large cluster size", c03_unbalanced_size),
        ("c04 one large cluster MSE ratio", c04_unbalanced_mse),
        ("c05 MSE as the large cluster grows", c05_large_cluster_growth),
        ("c06 variance rate in G", c06_variance_rate),
        ("c07 oracle Wald statistic is chi-square", c07_oracle_wald_ks),
        ("c08 mean Vhat against exact variance", c08_vhat_calibration),
        ("c09 measurement-error bias", c09_measurement_error),
        ("c10 efficiency ratio", c10_efficiency),
        ("c11 identical reports across workers", c11_worker_determinism),
        ("c12 exact rational oracle", c12_rational_oracle),
        ("c13 chi-square quantiles", c13_chi2_quantiles),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
