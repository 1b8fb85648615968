//! Python bindings. Every numerical error surfaces as `optbound.BoundError`,
//! whose message starts with the error kind.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use optbound::attainment as att;
use optbound::bound_engine::{self, BoundResult, MomentMatrix, QuantityVector, Tolerances};
use optbound::market;
use optbound::partition::{PartitionKind, PartitionSpec, RefineOptions};
use optbound::reference_models::{self, BinomialModel};
use optbound::vanilla_bounds;

create_exception!(optbound, BoundError, PyValueError);

fn err(e: optbound::BoundError) -> PyErr {
    BoundError::new_err(format!("{}: {e}", e.kind()))
}

fn tolerances(psd_tol: Option<f64>, factor_tol: Option<f64>, eig_tol: Option<f64>) -> Tolerances {
    let d = Tolerances::default();
    Tolerances {
        psd_tol: psd_tol.unwrap_or(d.psd_tol),
        factor_tol: factor_tol.unwrap_or(d.factor_tol),
        eig_tol: eig_tol.unwrap_or(d.eig_tol),
    }
}

/// Upper bound on a call struck at `k` given forward `f` and root-variance `nu`.
#[pyfunction]
fn vanilla_bound(f: f64, nu: f64, k: f64) -> PyResult<f64> {
    vanilla_bounds::vanilla_bound(f, nu, k).map_err(err)
}

/// Upper bound on the put struck at `k`.
#[pyfunction]
fn vanilla_put_bound(f: f64, nu: f64, k: f64) -> PyResult<f64> {
    vanilla_bounds::vanilla_put_bound(f, nu, k).map_err(err)
}

/// CDF implied by the call bound curve.
#[pyfunction]
fn implied_cdf(f: f64, nu: f64, k: f64) -> PyResult<f64> {
    vanilla_bounds::implied_cdf(f, nu, k).map_err(err)
}

#[pyclass(name = "BoundResult", frozen, get_all)]
struct PyBoundResult {
    bound: f64,
    eigenvalues: Vec<f64>,
    positive_count: usize,
    rank_q: usize,
    clipped_negative_mass: f64,
    factor_path: String,
}

#[pymethods]
impl PyBoundResult {
    fn __repr__(&self) -> String {
        format!(
            "BoundResult(bound={}, positive_count={}, rank_q={})",
            self.bound, self.positive_count, self.rank_q
        )
    }
}

impl From<BoundResult> for PyBoundResult {
    fn from(r: BoundResult) -> Self {
        let factor_path = match r.factor_path {
            bound_engine::FactorPath::PivotedCholesky => "pivoted_cholesky",
            bound_engine::FactorPath::EigenSqrt => "eigen_sqrt",
        };
        Self {
            bound: r.bound,
            eigenvalues: r.eigenvalues,
            positive_count: r.positive_count,
            rank_q: r.rank_q,
            clipped_negative_mass: r.clipped_negative_mass,
            factor_path: factor_path.to_string(),
        }
    }
}

/// Sum of the positive eigenvalues of `S diag(weights) Sᵀ` with `SᵀS = q`.
#[pyfunction]
#[pyo3(signature = (q, weights, psd_tol=None, factor_tol=None, eig_tol=None))]
fn positive_eigenvalue_bound(
    q: Vec<Vec<f64>>,
    weights: Vec<f64>,
    psd_tol: Option<f64>,
    factor_tol: Option<f64>,
    eig_tol: Option<f64>,
) -> PyResult<PyBoundResult> {
    let q = MomentMatrix::from_rows(&q).map_err(err)?;
    let lambda = QuantityVector::new(weights).map_err(err)?;
    let tol = tolerances(psd_tol, factor_tol, eig_tol);
    bound_engine::positive_eigenvalue_bound(&q, &lambda, &tol)
        .map(Into::into)
        .map_err(err)
}

/// Black model of a positive asset.
#[pyclass(name = "LognormalModel", frozen)]
struct PyLognormalModel(reference_models::LognormalModel);

#[pymethods]
impl PyLognormalModel {
    #[new]
    #[pyo3(signature = (forward, vol, expiry=1.0))]
    fn new(forward: f64, vol: f64, expiry: f64) -> PyResult<Self> {
        reference_models::LognormalModel::new(forward, vol, expiry)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn forward(&self) -> f64 {
        self.0.forward()
    }

    #[getter]
    fn vol(&self) -> f64 {
        self.0.vol()
    }

    #[getter]
    fn expiry(&self) -> f64 {
        self.0.expiry()
    }

    fn root_variance(&self) -> f64 {
        self.0.root_variance()
    }

    fn call_price(&self, k: f64) -> PyResult<f64> {
        self.0.call_price(k).map_err(err)
    }

    fn put_price(&self, k: f64) -> PyResult<f64> {
        self.0.put_price(k).map_err(err)
    }

    /// `E[a^p; l < a ≤ u]`.
    fn partial_moment(&self, p: f64, lower: f64, upper: f64) -> PyResult<f64> {
        self.0.partial_moment(p, lower, upper).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "LognormalModel(forward={}, vol={}, expiry={})",
            self.0.forward(),
            self.0.vol(),
            self.0.expiry()
        )
    }
}

/// A flat (digital) or linear (hat) partition of the asset.
#[pyclass(name = "Partition", frozen)]
struct PyPartition(PartitionSpec);

#[pymethods]
impl PyPartition {
    /// `kind` is `"flat"` (points are interior cell boundaries) or `"linear"`
    /// (points are hat strikes).
    #[new]
    fn new(kind: &str, points: Vec<f64>) -> PyResult<Self> {
        let kind = match kind {
            "flat" => PartitionKind::Flat,
            "linear" => PartitionKind::Linear,
            other => return Err(PyValueError::new_err(format!("unknown partition kind {other:?}"))),
        };
        PartitionSpec::new(kind, points).map(Self).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.0.points().to_vec()
    }

    /// Refined call bound at `k` with partition moments taken from `model`.
    fn refined_bound(&self, model: &PyLognormalModel, k: f64) -> PyResult<f64> {
        self.0
            .refined_bound(&model.0, k, &RefineOptions::default())
            .map_err(err)
    }
}

/// Root-variance of the cross rate `a₂/a₁`.
#[pyfunction]
fn cross_root_variance(nu1: f64, nu2: f64, rho: f64) -> PyResult<f64> {
    market::cross_root_variance(nu1, nu2, rho).map_err(err)
}

/// Call bound on the cross rate with forward `forward`.
#[pyfunction]
fn fx_cross_bound(nu1: f64, nu2: f64, rho: f64, forward: f64, k: f64) -> PyResult<f64> {
    market::FxLegMoments::new(nu1, nu2, rho, forward)
        .and_then(|legs| legs.bound(k))
        .map_err(err)
}

#[pyclass(name = "CapletCdfScan", frozen, get_all)]
struct PyCapletCdfScan {
    strikes: Vec<f64>,
    bounds: Vec<f64>,
    positive_counts: Vec<usize>,
    cdf: Vec<f64>,
    switch_strikes: Vec<f64>,
    switch_location: f64,
    switch_mass: f64,
    mass_at_zero: f64,
}

/// Swap-rate curve for forward-starting caplets.
#[pyclass(name = "SwapCurve", frozen)]
struct PySwapCurve(market::SwapCurveSlice);

#[pymethods]
impl PySwapCurve {
    /// Flat curve with the root-variance `nu` applied to the shifted rates.
    #[staticmethod]
    #[pyo3(signature = (periods, discount_rate, forward, nu, rho, shift=0.0, delta=1.0))]
    fn flat(periods: usize, discount_rate: f64, forward: f64, nu: f64, rho: f64, shift: f64, delta: f64) -> PyResult<Self> {
        market::SwapCurveSlice::flat(periods, discount_rate, delta, forward, nu, rho, shift)
            .map(Self)
            .map_err(err)
    }

    /// Flat curve whose unshifted rates follow a Black model with volatility `vol`.
    #[staticmethod]
    #[pyo3(signature = (periods, discount_rate, forward, vol, rho, shift=0.0, delta=1.0, expiry=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn flat_lognormal(
        periods: usize,
        discount_rate: f64,
        forward: f64,
        vol: f64,
        rho: f64,
        shift: f64,
        delta: f64,
        expiry: f64,
    ) -> PyResult<Self> {
        market::SwapCurveSlice::flat_lognormal(periods, discount_rate, delta, forward, vol, expiry, rho, shift)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn root_variances(&self) -> Vec<f64> {
        self.0.root_variances().to_vec()
    }

    #[getter]
    fn shift(&self) -> f64 {
        self.0.shift()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Bound on the caplet of period `n` (1-based) struck at `k`.
    fn caplet_bound(&self, n: usize, k: f64) -> PyResult<PyBoundResult> {
        market::CapletProblem::new(&self.0, n, k)
            .and_then(|p| p.bound_result(&Tolerances::default()))
            .map(Into::into)
            .map_err(err)
    }

    #[pyo3(signature = (n, strikes, step=1e-6))]
    fn caplet_cdf_scan(&self, n: usize, strikes: Vec<f64>, step: f64) -> PyResult<PyCapletCdfScan> {
        let opts = market::CdfScanOptions {
            step,
            ..Default::default()
        };
        let s = market::caplet_cdf_scan(&self.0, n, &strikes, &opts).map_err(err)?;
        Ok(PyCapletCdfScan {
            strikes: s.strikes,
            bounds: s.bounds,
            positive_counts: s.positive_counts,
            cdf: s.cdf,
            switch_strikes: s.switch_strikes,
            switch_location: s.switch_location,
            switch_mass: s.switch_mass,
            mass_at_zero: s.mass_at_zero,
        })
    }
}

/// Two-state model `(a_minus, a_plus, chi)` with weights `sin²χ`, `cos²χ`.
#[pyclass(name = "BinomialModel", frozen, get_all)]
struct PyBinomialModel {
    a_minus: f64,
    a_plus: f64,
    chi: f64,
}

impl From<BinomialModel> for PyBinomialModel {
    fn from(m: BinomialModel) -> Self {
        Self {
            a_minus: m.a_minus,
            a_plus: m.a_plus,
            chi: m.chi,
        }
    }
}

#[pymethods]
impl PyBinomialModel {
    fn call_price(&self, k: f64) -> PyResult<f64> {
        let m = BinomialModel::new(self.a_minus, self.a_plus, self.chi).map_err(err)?;
        Ok(att::binomial_call(&m, k))
    }

    fn __repr__(&self) -> String {
        format!(
            "BinomialModel(a_minus={}, a_plus={}, chi={})",
            self.a_minus, self.a_plus, self.chi
        )
    }
}

/// Binomial model matching `f` and `nu` at mixing angle `chi`.
#[pyfunction]
fn binomial_calibrate(f: f64, nu: f64, chi: f64) -> PyResult<PyBinomialModel> {
    att::binomial_calibrate(f, nu, chi).map(Into::into).map_err(err)
}

/// Calibrated binomial model whose call price at `k` equals the bound.
#[pyfunction]
fn optimal_binomial(f: f64, nu: f64, k: f64) -> PyResult<PyBinomialModel> {
    att::optimal_binomial(f, nu, k).map(Into::into).map_err(err)
}

/// Bound at `k_to` minus the price there of the model optimal at `k_from`.
#[pyfunction]
fn cross_strike_miss(f: f64, nu: f64, k_from: f64, k_to: f64) -> PyResult<f64> {
    att::cross_strike_miss(f, nu, k_from, k_to).map_err(err)
}

/// Root-variance implied by the bound curve for constraint `nu`.
#[pyfunction]
fn implied_root_variance(nu: f64) -> PyResult<f64> {
    att::implied_moment(nu).map(|m| m.implied_nu).map_err(err)
}

/// `E[aⁿ]/fⁿ` under the measure implied by the bound curve.
#[pyfunction]
fn general_moment(nu: f64, n: f64) -> PyResult<f64> {
    att::general_moment(nu, n).map_err(err)
}

#[pymodule]
#[pyo3(name = "optbound")]
fn optbound_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BoundError", m.py().get_type::<BoundError>())?;
    m.add_function(wrap_pyfunction!(vanilla_bound, m)?)?;
    m.add_function(wrap_pyfunction!(vanilla_put_bound, m)?)?;
    m.add_function(wrap_pyfunction!(implied_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(positive_eigenvalue_bound, m)?)?;
    m.add_function(wrap_pyfunction!(cross_root_variance, m)?)?;
    m.add_function(wrap_pyfunction!(fx_cross_bound, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_binomial, m)?)?;
    m.add_function(wrap_pyfunction!(cross_strike_miss, m)?)?;
    m.add_function(wrap_pyfunction!(implied_root_variance, m)?)?;
    m.add_function(wrap_pyfunction!(general_moment, m)?)?;
    m.add_class::<PyBoundResult>()?;
    m.add_class::<PyLognormalModel>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PySwapCurve>()?;
    m.add_class::<PyCapletCdfScan>()?;
    m.add_class::<PyBinomialModel>()?;
    Ok(())
}
