//! Validation and execution of configured experiments.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{CurveConfig, Experiment, Grid};
use super::output::{Cell, Table};
use crate::attainment::{
    cross_strike_miss, general_moment, implied_root_variance_curve, local_attainment_scan,
};
use crate::bound_engine::Tolerances;
use crate::error::{BoundError, Result};
use crate::market::{
    annuity_weights, caplet_cdf_scan, cross_root_variance, forward_from_swaps, CapletProblem,
    CdfScanOptions, SwapCurveSlice,
};
use crate::partition::{
    flat_conditional_moments, flat_refined_bound, hat_moments, hat_refined_bound, RefineOptions,
};
use crate::reference_models::{implied_lognormal_vol, implied_normal_vol, LognormalModel};
use crate::vanilla_bounds::{check_decreasing_convex, smile_curve, vanilla_bound};

/// Second-difference slack of the shape check applied to every bound column.
pub const SHAPE_SLACK: f64 = 1e-10;

/// Factor by which the finest refinement must close the unrefined gap to the
/// Black price.
pub const CONVERGENCE_FACTOR: f64 = 0.2;

/// An experiment with grids resolved and inputs validated.
#[derive(Debug, Clone)]
pub struct Plan {
    pub name: String,
    pub kind: &'static str,
    spec: PlanSpec,
}

#[derive(Debug, Clone)]
enum PlanSpec {
    VanillaSmile {
        forward: f64,
        nus: Vec<f64>,
        strikes: Vec<f64>,
        expiry: f64,
    },
    Refine {
        linear: bool,
        model: LognormalModel,
        strikes: Vec<f64>,
        partitions: Vec<Vec<f64>>,
    },
    FxCross {
        forward: f64,
        nu1: f64,
        nu2: f64,
        rhos: Vec<f64>,
        strikes: Vec<f64>,
        expiry: f64,
    },
    CapletBound {
        curves: Vec<(f64, SwapCurveSlice)>,
        period: usize,
        strikes: Vec<f64>,
        expiry: f64,
    },
    CapletCdf {
        curves: Vec<(f64, SwapCurveSlice)>,
        period: usize,
        strikes: Vec<f64>,
        expiry: f64,
        step: f64,
    },
    LocalAttain {
        forward: f64,
        nus: Vec<f64>,
        strikes: Vec<f64>,
        attain_tol: f64,
        cross: Option<[f64; 2]>,
    },
    GlobalAttain {
        nus: Vec<f64>,
        orders: Vec<f64>,
    },
}

/// Result of one experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
}

fn grid(name: &str, g: &Grid) -> std::result::Result<Vec<f64>, String> {
    let pts = g.points().map_err(|e| format!("{name}: {e}"))?;
    if pts.is_empty() {
        return Err(format!("{name}: grid is empty"));
    }
    Ok(pts)
}

fn positive(name: &str, xs: &[f64]) -> std::result::Result<(), String> {
    match xs.iter().find(|&&x| !(x > 0.0)) {
        Some(x) => Err(format!("{name}: {x} is not positive")),
        None => Ok(()),
    }
}

fn open_unit(name: &str, xs: &[f64], lo_open: bool, hi_open: bool) -> std::result::Result<(), String> {
    for &x in xs {
        let lo = if lo_open { x > 0.0 } else { x >= 0.0 };
        let hi = if hi_open { x < 1.0 } else { x <= 1.0 };
        if !(lo && hi) {
            return Err(format!("{name}: {x} outside the allowed range"));
        }
    }
    Ok(())
}

fn lib(e: BoundError) -> String {
    e.to_string()
}

fn curve_slice(c: &CurveConfig, rho: f64, shift: f64) -> std::result::Result<SwapCurveSlice, String> {
    match (c.vol, c.nu) {
        (Some(vol), None) => SwapCurveSlice::flat_lognormal(
            c.periods,
            c.discount_rate,
            c.delta,
            c.forward,
            vol,
            c.expiry,
            rho,
            shift,
        ),
        (None, Some(nu)) => {
            SwapCurveSlice::flat(c.periods, c.discount_rate, c.delta, c.forward, nu, rho, shift)
        }
        _ => return Err("curve: give exactly one of `vol` and `nu`".into()),
    }
    .map_err(lib)
}

fn check_period(slice: &SwapCurveSlice, period: usize) -> std::result::Result<(), String> {
    if !(2..=slice.len()).contains(&period) {
        return Err(format!("period {period} must lie in 2..={}", slice.len()));
    }
    // Surfaces a non-positive shifted swap rate at validation time.
    CapletProblem::new(slice, period, 0.0).map_err(lib)?;
    Ok(())
}

impl Plan {
    /// Resolves grids and checks every module precondition that does not need
    /// the numerics to run.
    pub fn new(exp: &Experiment) -> std::result::Result<Self, String> {
        let spec = match exp {
            Experiment::VanillaSmile {
                forward,
                nus,
                strikes,
                expiry,
                ..
            } => {
                let nus = grid("nus", nus)?;
                let strikes = grid("strikes", strikes)?;
                positive("forward", &[*forward])?;
                positive("expiry", &[*expiry])?;
                positive("strikes", &strikes)?;
                open_unit("nus", &nus, false, false)?;
                PlanSpec::VanillaSmile {
                    forward: *forward,
                    nus,
                    strikes,
                    expiry: *expiry,
                }
            }
            Experiment::FlatRefine {
                forward,
                vol,
                expiry,
                strikes,
                partitions,
                ..
            }
            | Experiment::LinearRefine {
                forward,
                vol,
                expiry,
                strikes,
                partitions,
                ..
            } => {
                let linear = matches!(exp, Experiment::LinearRefine { .. });
                let model = LognormalModel::new(*forward, *vol, *expiry).map_err(lib)?;
                if *vol == 0.0 {
                    return Err("vol must be positive for refinement experiments".into());
                }
                let strikes = grid("strikes", strikes)?;
                positive("strikes", &strikes)?;
                if partitions.is_empty() {
                    return Err("partitions: at least one partition required".into());
                }
                let parts = partitions
                    .iter()
                    .map(|g| {
                        let p = g.points().map_err(|e| format!("partitions: {e}"))?;
                        positive("partitions", &p)?;
                        if linear && p.is_empty() {
                            return Err("partitions: a linear partition needs a strike".to_string());
                        }
                        Ok(p)
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                PlanSpec::Refine {
                    linear,
                    model,
                    strikes,
                    partitions: parts,
                }
            }
            Experiment::FxCross {
                forward,
                nu1,
                nu2,
                rhos,
                strikes,
                expiry,
                ..
            } => {
                let rhos = grid("rhos", rhos)?;
                let strikes = grid("strikes", strikes)?;
                positive("forward", &[*forward])?;
                positive("expiry", &[*expiry])?;
                positive("strikes", &strikes)?;
                for &rho in &rhos {
                    cross_root_variance(*nu1, *nu2, rho).map_err(lib)?;
                }
                PlanSpec::FxCross {
                    forward: *forward,
                    nu1: *nu1,
                    nu2: *nu2,
                    rhos,
                    strikes,
                    expiry: *expiry,
                }
            }
            Experiment::CapletBound {
                curve,
                period,
                rhos,
                shift,
                strikes,
                ..
            } => {
                let rhos = grid("rhos", rhos)?;
                let strikes = grid("strikes", strikes)?;
                let curves = rhos
                    .iter()
                    .map(|&rho| {
                        let s = curve_slice(curve, rho, *shift)?;
                        check_period(&s, *period)?;
                        Ok((rho, s))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                positive("expiry", &[curve.expiry])?;
                PlanSpec::CapletBound {
                    curves,
                    period: *period,
                    strikes,
                    expiry: curve.expiry,
                }
            }
            Experiment::CapletCdf {
                curve,
                period,
                rho,
                shifts,
                strikes,
                step,
                ..
            } => {
                let shifts = grid("shifts", shifts)?;
                let strikes = grid("strikes", strikes)?;
                let curves = shifts
                    .iter()
                    .map(|&alpha| {
                        let s = curve_slice(curve, *rho, alpha)?;
                        check_period(&s, *period)?;
                        Ok((alpha, s))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                let step = step.unwrap_or(CdfScanOptions::default().step);
                positive("step", &[step])?;
                positive("expiry", &[curve.expiry])?;
                PlanSpec::CapletCdf {
                    curves,
                    period: *period,
                    strikes,
                    expiry: curve.expiry,
                    step,
                }
            }
            Experiment::LocalAttain {
                forward,
                nus,
                strikes,
                attain_tol,
                cross_strikes,
                ..
            } => {
                let nus = grid("nus", nus)?;
                let strikes = grid("strikes", strikes)?;
                positive("forward", &[*forward])?;
                positive("strikes", &strikes)?;
                positive("attain_tol", &[*attain_tol])?;
                // The one-state edge cases are excluded.
                open_unit("nus", &nus, true, true)?;
                if let Some(c) = cross_strikes {
                    positive("cross_strikes", c)?;
                }
                PlanSpec::LocalAttain {
                    forward: *forward,
                    nus,
                    strikes,
                    attain_tol: *attain_tol,
                    cross: *cross_strikes,
                }
            }
            Experiment::GlobalAttain {
                nus, moment_orders, ..
            } => {
                let nus = grid("nus", nus)?;
                open_unit("nus", &nus, false, false)?;
                open_unit("moment_orders", moment_orders, true, true)?;
                PlanSpec::GlobalAttain {
                    nus,
                    orders: moment_orders.clone(),
                }
            }
        };
        Ok(Self {
            name: exp.name().to_string(),
            kind: exp.kind(),
            spec,
        })
    }

    /// Runs the experiment. Strike-level work is spread over the current
    /// rayon pool; rows are assembled in grid order.
    pub fn execute(&self, tol: &Tolerances) -> Result<Outcome> {
        match &self.spec {
            PlanSpec::VanillaSmile {
                forward,
                nus,
                strikes,
                expiry,
            } => vanilla_smile(*forward, nus, strikes, *expiry),
            PlanSpec::Refine {
                linear,
                model,
                strikes,
                partitions,
            } => refine(*linear, model, strikes, partitions, tol),
            PlanSpec::FxCross {
                forward,
                nu1,
                nu2,
                rhos,
                strikes,
                expiry,
            } => fx_cross(*forward, *nu1, *nu2, rhos, strikes, *expiry),
            PlanSpec::CapletBound {
                curves,
                period,
                strikes,
                expiry,
            } => caplet_bounds(curves, *period, strikes, *expiry, tol),
            PlanSpec::CapletCdf {
                curves,
                period,
                strikes,
                expiry,
                step,
            } => caplet_cdf(curves, *period, strikes, *expiry, *step, tol),
            PlanSpec::LocalAttain {
                forward,
                nus,
                strikes,
                attain_tol,
                cross,
            } => local_attain(*forward, nus, strikes, *attain_tol, *cross),
            PlanSpec::GlobalAttain { nus, orders } => global_attain(nus, orders),
        }
    }
}

fn shape_check(what: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    check_decreasing_convex(xs, ys, SHAPE_SLACK)
        .map_err(|e| BoundError::ShapeViolation(format!("{what}: {e}")))
}

fn vanilla_smile(f: f64, nus: &[f64], strikes: &[f64], expiry: f64) -> Result<Outcome> {
    let curves = nus
        .par_iter()
        .map(|&nu| smile_curve(f, nu, strikes, expiry))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(["nu", "strike", "bound", "implied_vol", "cdf"]);
    let mut per_nu = Vec::new();
    for c in &curves {
        shape_check(&format!("bound at nu = {}", c.root_variance), strikes, &c.bounds)?;
        for i in 0..strikes.len() {
            table.push(vec![
                c.root_variance.into(),
                strikes[i].into(),
                c.bounds[i].into(),
                c.implied_vols[i].into(),
                c.cdf[i].into(),
            ]);
        }
        per_nu.push(json!({
            "nu": c.root_variance,
            "max_bound": c.bounds.iter().copied().fold(0.0, f64::max),
            "cdf_first_strike": c.cdf[0],
        }));
    }
    Ok(Outcome {
        table,
        summary: json!({ "shape_check": "passed", "curves": per_nu }),
    })
}

fn refine(
    linear: bool,
    model: &LognormalModel,
    strikes: &[f64],
    partitions: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<Outcome> {
    let opts = RefineOptions {
        tolerances: *tol,
        ..Default::default()
    };
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut moment_checks = Vec::new();
    for p in partitions {
        let n = if linear { p.len() } else { p.len() + 1 };
        let mut label = format!("bound_N{n}");
        if labels.contains(&label) {
            label = format!("{label}_{}", labels.len());
        }
        let values = if linear {
            let m = hat_moments(model, p, &opts)?;
            let (u, a, s) = m.row_sums();
            moment_checks.push(json!({
                "partition": label,
                "row_sum_errors": [u - 1.0, a - model.forward(), s - model.moment(0.5)],
            }));
            strikes
                .par_iter()
                .map(|&k| hat_refined_bound(&m, k, &opts))
                .collect::<Result<Vec<_>>>()?
        } else {
            let m = flat_conditional_moments(model, p, &opts)?;
            let (d, fd, sd) = m.normalisation_sums();
            moment_checks.push(json!({
                "partition": label,
                "normalisation_errors": [d - 1.0, fd - model.forward(), sd - model.moment(0.5)],
                "dropped_cells": m.dropped,
            }));
            strikes
                .par_iter()
                .map(|&k| flat_refined_bound(&m, k, tol))
                .collect::<Result<Vec<_>>>()?
        };
        shape_check(&label, strikes, &values)?;
        labels.push(label);
        columns.push(values);
    }
    let bs = strikes
        .iter()
        .map(|&k| model.call_price(k))
        .collect::<Result<Vec<_>>>()?;

    let mut header = vec!["strike".to_string()];
    header.extend(labels.iter().cloned());
    header.push("bs_price".into());
    let mut table = Table::new(header);
    for i in 0..strikes.len() {
        let mut row: Vec<Cell> = vec![strikes[i].into()];
        row.extend(columns.iter().map(|c| Cell::Real(c[i])));
        row.push(bs[i].into());
        table.push(row);
    }

    let max_gap = |c: &[f64]| c.iter().zip(&bs).map(|(b, p)| b - p).fold(f64::MIN, f64::max);
    let min_gap = |c: &[f64]| c.iter().zip(&bs).map(|(b, p)| b - p).fold(f64::MAX, f64::min);
    let per_partition: Vec<Value> = labels
        .iter()
        .zip(&columns)
        .map(|(l, c)| json!({ "column": l, "max_gap_to_bs": max_gap(c), "min_gap_to_bs": min_gap(c) }))
        .collect();
    let ordered: Vec<Value> = columns
        .windows(2)
        .map(|w| {
            let worst = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).fold(f64::MAX, f64::min);
            json!({ "min_difference": worst })
        })
        .collect();
    let first = max_gap(&columns[0]);
    let last = max_gap(columns.last().unwrap());
    Ok(Outcome {
        table,
        summary: json!({
            "shape_check": "passed",
            "partitions": per_partition,
            "adjacent_partition_ordering": ordered,
            "moments": moment_checks,
            "convergence_ratio": if first > 0.0 { last / first } else { 0.0 },
            "convergence_factor": CONVERGENCE_FACTOR,
        }),
    })
}

fn fx_cross(
    f: f64,
    nu1: f64,
    nu2: f64,
    rhos: &[f64],
    strikes: &[f64],
    expiry: f64,
) -> Result<Outcome> {
    let mut table = Table::new(["rho", "strike", "cross_nu", "bound", "implied_vol"]);
    let mut curves = Vec::new();
    let mut per_rho = Vec::new();
    for &rho in rhos {
        let nu = cross_root_variance(nu1, nu2, rho)?;
        let rows = strikes
            .par_iter()
            .map(|&k| {
                let b = vanilla_bound(f, nu, k)?;
                Ok((b, implied_lognormal_vol(f, k, expiry, b.min(f))?))
            })
            .collect::<Result<Vec<_>>>()?;
        let bounds: Vec<f64> = rows.iter().map(|r| r.0).collect();
        shape_check(&format!("bound at rho = {rho}"), strikes, &bounds)?;
        for (k, (b, v)) in strikes.iter().zip(&rows) {
            table.push(vec![rho.into(), (*k).into(), nu.into(), (*b).into(), (*v).into()]);
        }
        per_rho.push(json!({ "rho": rho, "cross_nu": nu }));
        curves.push(bounds);
    }
    let decreasing = curves
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b <= *a + 1e-15));
    Ok(Outcome {
        table,
        summary: json!({
            "shape_check": "passed",
            "curves": per_rho,
            "bound_non_increasing_in_rho": decreasing,
        }),
    })
}

fn unshifted_forward(slice: &SwapCurveSlice, n: usize) -> Result<f64> {
    let lambda = annuity_weights(slice, n)?.lambda;
    Ok(forward_from_swaps(lambda, slice.forwards()[n - 1], slice.forwards()[n - 2]))
}

fn caplet_bounds(
    curves: &[(f64, SwapCurveSlice)],
    n: usize,
    strikes: &[f64],
    expiry: f64,
    tol: &Tolerances,
) -> Result<Outcome> {
    let mut table = Table::new(["rho", "strike", "bound", "implied_normal_vol", "positive_eigenvalues"]);
    let mut per_rho = Vec::new();
    for (rho, slice) in curves {
        let r = unshifted_forward(slice, n)?;
        let rows = strikes
            .par_iter()
            .map(|&k| {
                let res = CapletProblem::new(slice, n, k)?.bound_result(tol)?;
                let vol = implied_normal_vol(r, k, expiry, res.bound.max((r - k).max(0.0)))?;
                Ok((res.bound, vol, res.positive_count))
            })
            .collect::<Result<Vec<_>>>()?;
        let bounds: Vec<f64> = rows.iter().map(|r| r.0).collect();
        shape_check(&format!("caplet bound at rho = {rho}"), strikes, &bounds)?;
        for (k, (b, v, c)) in strikes.iter().zip(&rows) {
            table.push(vec![(*rho).into(), (*k).into(), (*b).into(), (*v).into(), (*c).into()]);
        }
        per_rho.push(json!({ "rho": rho, "forward_rate": r, "max_bound": bounds.iter().copied().fold(0.0, f64::max) }));
    }
    Ok(Outcome {
        table,
        summary: json!({ "shape_check": "passed", "curves": per_rho }),
    })
}

fn caplet_cdf(
    curves: &[(f64, SwapCurveSlice)],
    n: usize,
    strikes: &[f64],
    expiry: f64,
    step: f64,
    tol: &Tolerances,
) -> Result<Outcome> {
    let opts = CdfScanOptions {
        step,
        tolerances: *tol,
    };
    let scans = curves
        .par_iter()
        .map(|(_, slice)| caplet_cdf_scan(slice, n, strikes, &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new([
        "shift",
        "strike",
        "bound",
        "implied_normal_vol",
        "cdf",
        "positive_eigenvalues",
    ]);
    let mut per_shift = Vec::new();
    for ((alpha, slice), scan) in curves.iter().zip(&scans) {
        shape_check(&format!("caplet bound at shift = {alpha}"), strikes, &scan.bounds)?;
        let r = unshifted_forward(slice, n)?;
        for i in 0..strikes.len() {
            let k = strikes[i];
            let vol = implied_normal_vol(r, k, expiry, scan.bounds[i].max((r - k).max(0.0)))?;
            table.push(vec![
                (*alpha).into(),
                k.into(),
                scan.bounds[i].into(),
                vol.into(),
                scan.cdf[i].into(),
                scan.positive_counts[i].into(),
            ]);
        }
        per_shift.push(json!({
            "shift": alpha,
            "switch_strikes": scan.switch_strikes,
            "switch_location": scan.switch_location,
            "switch_mass": scan.switch_mass,
            "mass_at_zero": scan.mass_at_zero,
        }));
    }
    Ok(Outcome {
        table,
        summary: json!({ "shape_check": "passed", "shifts": per_shift }),
    })
}

fn local_attain(
    f: f64,
    nus: &[f64],
    strikes: &[f64],
    attain_tol: f64,
    cross: Option<[f64; 2]>,
) -> Result<Outcome> {
    let reports = nus
        .par_iter()
        .map(|&nu| local_attainment_scan(f, nu, strikes, attain_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new([
        "nu",
        "strike",
        "chi",
        "a_minus",
        "a_plus",
        "binomial_price",
        "bound",
        "gap",
    ]);
    let mut per_nu = Vec::new();
    for r in &reports {
        let bounds: Vec<f64> = r.points.iter().map(|p| p.bound).collect();
        shape_check(&format!("bound at nu = {}", r.nu), strikes, &bounds)?;
        for p in &r.points {
            table.push(vec![
                r.nu.into(),
                p.strike.into(),
                p.chi.into(),
                p.a_minus.into(),
                p.a_plus.into(),
                p.binomial_price.into(),
                p.bound.into(),
                p.gap.into(),
            ]);
        }
        let miss = match cross {
            Some([a, b]) => Some(cross_strike_miss(f, r.nu, a, b)?),
            None => r.cross_strike_miss,
        };
        per_nu.push(json!({
            "nu": r.nu,
            "max_gap": r.max_gap,
            "within_tolerance": r.max_gap <= attain_tol,
            "cross_strike_miss": miss,
        }));
    }
    Ok(Outcome {
        table,
        summary: json!({ "shape_check": "passed", "attain_tol": attain_tol, "curves": per_nu }),
    })
}

fn global_attain(nus: &[f64], orders: &[f64]) -> Result<Outcome> {
    let curve = implied_root_variance_curve(nus)?;
    let moments = orders
        .iter()
        .map(|&n| nus.par_iter().map(|&nu| general_moment(nu, n)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["nu".to_string(), "implied_sqrt_moment".into(), "implied_nu".into()];
    header.extend(orders.iter().map(|n| format!("moment_{n}")));
    let mut table = Table::new(header);
    for (i, p) in curve.iter().enumerate() {
        let mut row: Vec<Cell> = vec![p.nu.into(), p.sqrt_moment.into(), p.implied_nu.into()];
        row.extend(moments.iter().map(|m| Cell::Real(m[i])));
        table.push(row);
    }
    let interior: Vec<f64> = curve
        .iter()
        .filter(|p| p.nu > 0.0 && p.nu < 1.0)
        .map(|p| p.implied_nu - p.nu)
        .collect();
    let endpoint_error = curve
        .iter()
        .filter(|p| p.nu == 0.0 || p.nu == 1.0)
        .map(|p| (p.implied_nu - p.nu).abs())
        .fold(0.0, f64::max);
    Ok(Outcome {
        table,
        summary: json!({
            "interior_points": interior.len(),
            "min_interior_margin": interior.iter().copied().fold(f64::INFINITY, f64::min),
            "endpoint_error": endpoint_error,
        }),
    })
}
