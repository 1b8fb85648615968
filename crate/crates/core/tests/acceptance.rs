//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use optbound::attainment::{
    cross_strike_miss, general_moment, implied_root_variance_curve, local_attainment_scan,
};
use optbound::bound_engine::{factor_psd, positive_eigenvalue_bound, transfer_matrix};
use optbound::cli;
use optbound::market::{caplet_cdf_scan, cross_root_variance, CdfScanOptions, FxLegMoments, SwapCurveSlice};
use optbound::partition::{
    flat_conditional_moments, flat_refined_bound, hat_moments, hat_refined_bound, RefineOptions,
};
use optbound::reference_models::bs_call_price;
use optbound::vanilla_bounds::{check_decreasing_convex, vanilla_bound_via_engine};
use optbound::{implied_cdf, vanilla_bound, LognormalModel, MomentMatrix, QuantityVector, Tolerances};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect()
}

fn engine_matches_closed_form() -> Outcome {
    let tol = Tolerances::default();
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for f in [0.5, 1.0, 2.0] {
        for nu in [0.0, 0.01, 0.25, 0.99, 1.0] {
            for i in 0..30 {
                let k = 0.1 * f * 50f64.powf(i as f64 / 29.0);
                let exact = vanilla_bound(f, nu, k).map_err(|e| e.to_string())?;
                let engine = vanilla_bound_via_engine(f, nu, k, &tol).map_err(|e| e.to_string())?;
                let err = if exact == 0.0 {
                    engine.abs()
                } else {
                    ((engine - exact) / exact).abs()
                };
                ensure(err <= 1e-12, || format!("f={f} nu={nu} k={k}: rel err {err:e}"))?;
                worst = worst.max(err);
                count += 1;
            }
        }
    }
    let elapsed = t0.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("{count} points, max rel err {worst:.2e}, {elapsed:.2?}"))
}

fn atm_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for f in [0.01, 0.5, 1.0, 2.0, 37.0] {
        for nu in [0.0, 1e-6, 0.01, 0.25, 0.5, 0.99, 1.0] {
            let b = vanilla_bound(f, nu, f).map_err(|e| e.to_string())?;
            let expected = (f * f * nu).sqrt();
            let err = (b - expected).abs() / f.max(1.0);
            ensure(err <= 1e-14, || format!("f={f} nu={nu}: {b} vs {expected}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("max err {worst:.2e}"))
}

fn point_mass_at_zero() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.01, 0.04, 0.09] {
        for k in [1e-9, 1e-10, 1e-12, 0.0] {
            let c = implied_cdf(1.0, nu, k).map_err(|e| e.to_string())?;
            let err = (c - nu).abs();
            ensure(err <= 1e-8, || format!("nu={nu} k={k}: cdf {c}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("max |cdf(0+) - nu| {worst:.2e}"))
}

fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        if a.determinant().abs() > 1e-3 {
            return a.qr().q();
        }
    }
}

fn schur_horn_domination() -> Outcome {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let t0 = Instant::now();
    let instances = 100;
    let bases = 100;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..instances {
        let a = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.gen_range(0.0..1.0));
        let q = MomentMatrix::new(a.transpose() * &a).map_err(|e| e.to_string())?;
        let lambda = QuantityVector::new((0..4).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .map_err(|e| e.to_string())?;
        let bound = positive_eigenvalue_bound(&q, &lambda, &tol).map_err(|e| e.to_string())?.bound;
        let factor = factor_psd(&q, &tol).map_err(|e| e.to_string())?;
        let p = transfer_matrix(&factor, &lambda).map_err(|e| e.to_string())?;
        let r = p.nrows();
        let scale = bound.abs().max(1.0);
        for _ in 0..bases {
            let z = random_orthonormal(&mut rng, r);
            let diag_positive: f64 = (0..r)
                .map(|i| {
                    let zi = z.column(i);
                    (zi.transpose() * &p * zi)[(0, 0)].max(0.0)
                })
                .sum();
            let excess = (diag_positive - bound) / scale;
            worst_excess = worst_excess.max(excess);
            ensure(excess <= 1e-12, || format!("basis exceeds bound by {excess:e}"))?;
        }
    }
    let elapsed = t0.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "{} bases, max excess {worst_excess:.2e}, {elapsed:.2?}",
        instances * bases
    ))
}

fn refinement_sandwich() -> Outcome {
    let t0 = Instant::now();
    let model = LognormalModel::new(1.0, 0.4, 1.0).map_err(|e| e.to_string())?;
    let opts = RefineOptions::default();
    let strikes = grid(0.4, 2.6, 0.1);
    let flat_parts = [vec![], linspace(0.5, 2.5, 5), linspace(0.1, 2.9, 29)];
    let hat_parts = [vec![1.0], linspace(0.5, 2.5, 5), linspace(0.1, 2.9, 29)];
    let bs: Vec<f64> = strikes
        .iter()
        .map(|&k| bs_call_price(&model, k))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;

    let mut report = Vec::new();
    for (label, curves) in [
        (
            "flat",
            flat_parts
                .iter()
                .map(|b| {
                    let m = flat_conditional_moments(&model, b, &opts)?;
                    strikes
                        .iter()
                        .map(|&k| flat_refined_bound(&m, k, &opts.tolerances))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>(),
        ),
        (
            "linear",
            hat_parts
                .iter()
                .map(|s| {
                    let m = hat_moments(&model, s, &opts)?;
                    strikes
                        .iter()
                        .map(|&k| hat_refined_bound(&m, k, &opts))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>(),
        ),
    ] {
        let curves = curves.map_err(|e| e.to_string())?;
        let mut min_gap = f64::INFINITY;
        for (j, &k) in strikes.iter().enumerate() {
            let chain = [curves[0][j], curves[1][j], curves[2][j], bs[j]];
            for w in chain.windows(2) {
                let gap = w[0] - w[1];
                min_gap = min_gap.min(gap);
                ensure(gap >= -1e-10, || format!("{label} k={k}: chain {chain:?}"))?;
            }
        }
        let spread = |c: &[f64]| c.iter().zip(&bs).map(|(b, p)| b - p).fold(0.0, f64::max);
        let ratio = spread(&curves[2]) / spread(&curves[0]);
        ensure(ratio <= 0.2, || format!("{label}: convergence ratio {ratio}"))?;
        report.push(format!("{label} ratio {ratio:.4} min gap {min_gap:.2e}"));
    }
    let elapsed = t0.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("{}, {elapsed:.2?}", report.join("; ")))
}

fn flat_normalisation() -> Outcome {
    let model = LognormalModel::new(1.0, 0.4, 1.0).map_err(|e| e.to_string())?;
    let nu = model.root_variance();
    let f = model.forward();
    let target = (1.0, f, (f * (1.0 - nu)).sqrt());
    let mut worst: f64 = 0.0;
    for b in [vec![], linspace(0.5, 2.5, 5), linspace(0.1, 2.9, 29)] {
        let m = flat_conditional_moments(&model, &b, &RefineOptions::default()).map_err(|e| e.to_string())?;
        let (d, p, s) = m.normalisation_sums();
        let err = (d - target.0).abs().max((p - target.1).abs()).max((s - target.2).abs());
        ensure(err <= 1e-10, || format!("{} cells: sums ({d}, {p}, {s})", b.len() + 1))?;
        worst = worst.max(err);
    }
    Ok(format!("max err {worst:.2e}"))
}

fn local_attainment() -> Outcome {
    let strikes = linspace(0.4, 2.6, 20);
    let mut worst_gap: f64 = 0.0;
    let mut min_miss = f64::INFINITY;
    for nu in [0.01, 0.04, 0.25] {
        let report = local_attainment_scan(1.0, nu, &strikes, 1e-9).map_err(|e| e.to_string())?;
        ensure(report.max_gap <= 1e-9, || format!("nu={nu}: gap {}", report.max_gap))?;
        worst_gap = worst_gap.max(report.max_gap);
        let miss = cross_strike_miss(1.0, nu, 0.8, 1.4).map_err(|e| e.to_string())?;
        ensure(miss > 1e-6, || format!("nu={nu}: model at 0.8 misses 1.4 by only {miss:e}"))?;
        min_miss = min_miss.min(miss);
    }
    Ok(format!("max rel gap {worst_gap:.2e}, min cross-strike miss {min_miss:.3e}"))
}

fn global_non_attainment() -> Outcome {
    let nus = linspace(0.0, 1.0, 21);
    let curve = implied_root_variance_curve(&nus).map_err(|e| e.to_string())?;
    let mut min_margin = f64::INFINITY;
    for m in &curve[1..20] {
        let margin = m.implied_nu - m.nu;
        ensure(margin > 0.0, || format!("nu={}: implied {}", m.nu, m.implied_nu))?;
        min_margin = min_margin.min(margin);
    }
    for m in [&curve[0], &curve[20]] {
        ensure((m.implied_nu - m.nu).abs() <= 1e-8, || {
            format!("endpoint nu={}: implied {}", m.nu, m.implied_nu)
        })?;
    }
    let mut worst: f64 = 0.0;
    for nu in [0.25, 0.5] {
        for n in [0.1, 0.3] {
            let a = general_moment(nu, n).map_err(|e| e.to_string())?;
            let b = general_moment(nu, 1.0 - n).map_err(|e| e.to_string())?;
            let err = (a - b).abs();
            ensure(err <= 1e-9, || format!("nu={nu} n={n}: {a} vs {b}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("min interior margin {min_margin:.4}, symmetry err {worst:.2e}"))
}

fn fx_composition() -> Outcome {
    for nu in [0.0, 0.01, 0.04, 0.25, 0.5, 0.9, 1.0] {
        let c = cross_root_variance(nu, nu, 1.0).map_err(|e| e.to_string())?;
        ensure(c.abs() <= 1e-15, || format!("matched legs nu={nu}: {c:e}"))?;
        for rho in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let c = cross_root_variance(0.0, nu, rho).map_err(|e| e.to_string())?;
            ensure((c - nu).abs() <= 1e-15, || format!("nu1=0 nu2={nu} rho={rho}: {c}"))?;
        }
    }
    let rhos = linspace(-1.0, 1.0, 41);
    let strikes = grid(0.5, 2.0, 0.05);
    for &k in &strikes {
        let values: Vec<f64> = rhos
            .iter()
            .map(|&rho| FxLegMoments::new(0.04, 0.09, rho, 1.0)?.bound(k))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (w, r) in values.windows(2).zip(rhos.windows(2)) {
            ensure(w[1] <= w[0], || format!("k={k}: bound rises from rho {} to {}", r[0], r[1]))?;
        }
        ensure(values[40] < values[0], || format!("k={k}: flat in rho"))?;
    }
    Ok(format!("identities exact, {} strikes x {} correlations monotone", strikes.len(), rhos.len()))
}

fn caplet_regime_switch() -> Outcome {
    let strikes = grid(-1.1, 0.06, 0.0005);
    let opts = CdfScanOptions::default();
    let mut parts = Vec::new();
    let mut masses = Vec::new();
    for alpha in [0.0, 0.5, 1.0] {
        let slice = SwapCurveSlice::flat_lognormal(10, 0.01, 1.0, 0.02, 0.4, 1.0, 0.995, alpha)
            .map_err(|e| e.to_string())?;
        let scan = caplet_cdf_scan(&slice, 10, &strikes, &opts).map_err(|e| e.to_string())?;
        let drops = scan.positive_counts.windows(2).filter(|c| c[0] == 2 && c[1] == 1).count();
        let changes = scan.positive_counts.windows(2).filter(|c| c[0] != c[1]).count();
        ensure(drops == 1 && changes == 1 && scan.switch_strikes.len() == 1, || {
            format!("alpha={alpha}: {drops} drops, {changes} count changes")
        })?;
        let at = scan.switch_strikes[0];
        ensure((at - scan.switch_location).abs() <= 0.0005 + 1e-12, || {
            format!("alpha={alpha}: switch at {at}, expected near {}", scan.switch_location)
        })?;
        parts.push(format!("alpha={alpha} switch {at:.4}"));
        masses.push(scan.mass_at_zero);
    }
    ensure(masses[0] > 0.0, || format!("alpha=0: mass at zero {:e}", masses[0]))?;
    ensure(masses[2] < 1e-6, || format!("alpha=1: mass at zero {:e}", masses[2]))?;
    Ok(format!(
        "{}; mass at zero {:.4} (alpha=0), {:.2e} (alpha=1)",
        parts.join(", "),
        masses[0],
        masses[2]
    ))
}

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Splits a CSV into curves along `strike`, keyed by the columns before it.
fn bound_curves(csv: &str) -> Vec<(String, Vec<f64>, Vec<f64>)> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let Some(ks) = header.iter().position(|h| *h == "strike") else {
        return Vec::new();
    };
    let bound_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("bound")).collect();
    let mut curves: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let key = cells[..ks].join(",");
        let k: f64 = cells[ks].parse().expect("numeric strike");
        for &c in &bound_cols {
            let label = format!("{}[{key}]", header[c]);
            let v: f64 = cells[c].parse().expect("numeric bound");
            match curves.iter_mut().find(|(l, _, _)| *l == label) {
                Some((_, xs, ys)) => {
                    xs.push(k);
                    ys.push(v);
                }
                None => curves.push((label, vec![k], vec![v])),
            }
        }
    }
    curves
}

fn cli_shape_guarantees() -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(config_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    ensure(!paths.is_empty(), || "no configurations found".into())?;
    let mut checked = 0;
    for path in &paths {
        let (cfg, bytes) = cli::load_config(path).map_err(|e| e.line())?;
        let plans = cli::plan(&cfg).map_err(|e| e.line())?;
        let (files, _) = cli::execute(&cfg, &bytes, &plans).map_err(|e| e.line())?;
        for (name, csv) in files.iter().filter(|(n, _)| n.ends_with(".csv")) {
            for (label, xs, ys) in bound_curves(csv) {
                check_decreasing_convex(&xs, &ys, 1e-10)
                    .map_err(|e| format!("{}/{name} {label}: {e}", path.display()))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} curves from {} configurations", paths.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("engine matches closed-form vanilla bound", engine_matches_closed_form),
        ("at-the-money identity", atm_identity),
        ("point mass at zero equals root-variance", point_mass_at_zero),
        ("random bases never beat the eigenvalue bound", schur_horn_domination),
        ("partition refinement sandwich and convergence", refinement_sandwich),
        ("flat partition normalisation", flat_normalisation),
        ("local attainment by binomial models", local_attainment),
        ("global non-attainment", global_non_attainment),
        ("FX cross composition", fx_composition),
        ("caplet eigenvalue regime switch", caplet_regime_switch),
        ("CLI bound curves decreasing and convex", cli_shape_guarantees),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
