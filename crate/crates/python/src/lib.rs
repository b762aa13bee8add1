//! Python bindings: samples travel as parallel `y`, `x`, `delta` lists with a
//! scalar covariate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tcquant::simulate::{gen_model1, gen_model2, Model, Model2Params};
use tcquant::{
    DistributionEstimate, Delta, Error, Estimator, KernelSpec, Observation, RightCensoredObservation, TailPolicy,
    WeightFamily, WeightVector,
};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn build_sample(y: &[f64], x: &[f64], delta: &[u8]) -> Result<Vec<Observation>, Error> {
    if y.len() != x.len() || y.len() != delta.len() {
        return Err(Error::InvalidInput(format!(
            "y, x and delta have lengths {}, {} and {}",
            y.len(),
            x.len(),
            delta.len()
        )));
    }
    y.iter()
        .zip(x)
        .zip(delta)
        .map(|((&y, &x), &d)| {
            let d = Delta::from_code(d).ok_or_else(|| Error::InvalidInput(format!("delta must be 0, 1 or 2; got {d}")))?;
            Ok(Observation::scalar(y, x, d))
        })
        .collect()
}

fn model(id: u8, c_l: f64, c_r: f64) -> Result<Model, Error> {
    Model::from_id(id, Model2Params { c_l, c_r })
}

/// Conditional distribution estimate at one covariate point.
#[pyclass(name = "Estimate", module = "pytcquant")]
struct PyEstimate {
    inner: DistributionEstimate,
}

#[pymethods]
impl PyEstimate {
    fn cdf(&self, t: f64) -> f64 {
        self.inner.cdf.eval(t)
    }

    /// `None` when `tau` is above the attainable range.
    fn quantile(&self, tau: f64) -> PyResult<Option<f64>> {
        Ok(tcquant::quantile(&self.inner, tau).map_err(py_err)?.value)
    }

    /// Jump locations and the cdf value from each one on.
    fn steps(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.cdf.locations().to_vec(), self.inner.cdf.values().to_vec())
    }

    #[getter]
    fn sup_value(&self) -> f64 {
        self.inner.sup_value
    }

    #[getter]
    fn estimator(&self) -> String {
        self.inner.variant.to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Estimate(estimator={}, jumps={}, sup={})",
            self.inner.variant,
            self.inner.cdf.len(),
            self.inner.sup_value
        )
    }
}

/// Draws `n` observations; returns `(y, x, delta)`.
#[pyfunction]
#[pyo3(signature = (model, n, seed, c_l=-0.5, c_r=1.5))]
fn simulate(model: u8, n: usize, seed: u64, c_l: f64, c_r: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<u8>)> {
    let s = match model {
        1 => gen_model1(n, seed),
        2 => gen_model2(n, Model2Params { c_l, c_r }, seed),
        m => return Err(PyValueError::new_err(format!("unknown model {m}"))),
    };
    let y = s.observations.iter().map(|o| o.y).collect();
    let x = s.observations.iter().map(|o| o.x[0]).collect();
    let d = s.observations.iter().map(|o| o.delta.code()).collect();
    Ok((y, x, d))
}

#[pyfunction]
#[pyo3(signature = (model, tau, x, c_l=-0.5, c_r=1.5))]
fn true_quantile(model: u8, tau: f64, x: f64, c_l: f64, c_r: f64) -> PyResult<f64> {
    let m = self::model(model, c_l, c_r).map_err(py_err)?;
    tcquant::true_quantile(m, tau, x).map_err(py_err)
}

/// Local weights of the sample covariates `xs` at the point `x`.
#[pyfunction]
#[pyo3(signature = (x, xs, h, family="ll"))]
fn weights(x: f64, xs: Vec<f64>, h: f64, family: &str) -> PyResult<Vec<f64>> {
    let family: WeightFamily = family.parse().map_err(py_err)?;
    let k = KernelSpec::default();
    let w = match family {
        WeightFamily::Nw => {
            let cov: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
            tcquant::nw_weights(&[x], &cov, h, &k)
        }
        WeightFamily::Ll => tcquant::ll_weights(x, &xs, h, &k),
    };
    Ok(w.map_err(py_err)?.weights)
}

#[pyfunction]
#[pyo3(signature = (y, x, delta, at, h, family="ll", estimator="ip", tail="undefined"))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    y: Vec<f64>,
    x: Vec<f64>,
    delta: Vec<u8>,
    at: f64,
    h: f64,
    family: &str,
    estimator: &str,
    tail: &str,
) -> PyResult<PyEstimate> {
    let sample = build_sample(&y, &x, &delta).map_err(py_err)?;
    let family: WeightFamily = family.parse().map_err(py_err)?;
    let variant: Estimator = estimator.parse().map_err(py_err)?;
    let tail: TailPolicy = tail.parse().map_err(py_err)?;
    let w = tcquant::local_weights(family, &[at], &sample, h, &KernelSpec::default()).map_err(py_err)?;
    let inner = tcquant::estimate(&sample, &w, variant, tail).map_err(py_err)?;
    Ok(PyEstimate { inner })
}

/// Same as `estimate` with caller-supplied weights.
#[pyfunction]
#[pyo3(signature = (y, delta, w, estimator="ip", tail="undefined"))]
fn estimate_weighted(y: Vec<f64>, delta: Vec<u8>, w: Vec<f64>, estimator: &str, tail: &str) -> PyResult<PyEstimate> {
    let x = vec![0.0; y.len()];
    let sample = build_sample(&y, &x, &delta).map_err(py_err)?;
    if w.len() != sample.len() {
        return Err(PyValueError::new_err("weights and sample differ in length"));
    }
    let w = WeightVector { weights: w, covariate_point: vec![], bandwidth: f64::NAN };
    let inner = tcquant::estimate(&sample, &w, estimator.parse().map_err(py_err)?, tail.parse().map_err(py_err)?)
        .map_err(py_err)?;
    Ok(PyEstimate { inner })
}

/// Weighted product-limit estimate for right-censored data; returns the
/// jump locations and the cdf value from each one on.
#[pyfunction]
fn beran(z: Vec<f64>, event: Vec<bool>, w: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if z.len() != event.len() || z.len() != w.len() {
        return Err(PyValueError::new_err("z, event and w differ in length"));
    }
    let sample: Vec<RightCensoredObservation> = z
        .iter()
        .zip(&event)
        .map(|(&z, &event)| RightCensoredObservation { z, x: vec![], event })
        .collect();
    let w = WeightVector { weights: w, covariate_point: vec![], bandwidth: f64::NAN };
    let f = tcquant::beran_estimate(&sample, &w).map_err(py_err)?;
    Ok((f.locations().to_vec(), f.values().to_vec()))
}

/// Returns the selected bandwidth and the loss of every candidate.
#[pyfunction]
#[pyo3(signature = (y, x, delta, tau, grid, blocks=25, runs=1, seed=0, family="ll", estimator="ip"))]
#[allow(clippy::too_many_arguments)]
fn cv_bandwidth(
    py: Python<'_>,
    y: Vec<f64>,
    x: Vec<f64>,
    delta: Vec<u8>,
    tau: f64,
    grid: Vec<f64>,
    blocks: usize,
    runs: usize,
    seed: u64,
    family: &str,
    estimator: &str,
) -> PyResult<(f64, Vec<f64>)> {
    let sample = build_sample(&y, &x, &delta).map_err(py_err)?;
    let mut cfg = tcquant::CvConfig::new(tau, grid);
    cfg.n_blocks = blocks;
    cfg.n_runs = runs;
    cfg.weight_family = family.parse().map_err(py_err)?;
    cfg.estimator = estimator.parse().map_err(py_err)?;
    let report = py.detach(|| tcquant::cv_bandwidth(&sample, &cfg, seed)).map_err(py_err)?;
    Ok((report.selected_h, report.loss_per_candidate))
}

/// Runs the built-in consistency checks; returns `(name, passed, detail)` rows.
#[pyfunction]
#[pyo3(signature = (seed=20240917))]
fn selftest(py: Python<'_>, seed: u64) -> Vec<(String, bool, String)> {
    py.detach(|| tcquant::selftest::run_selftest(seed))
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

#[pymodule]
fn pytcquant(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(true_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(weights, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_weighted, m)?)?;
    m.add_function(wrap_pyfunction!(beran, m)?)?;
    m.add_function(wrap_pyfunction!(cv_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_lists_are_checked() {
        let s = build_sample(&[1.0, 2.0], &[0.0, 0.5], &[0, 2]).unwrap();
        assert_eq!(s[1].delta, Delta::LeftCensored);
        assert!(build_sample(&[1.0], &[0.0, 0.5], &[0]).is_err());
        assert!(build_sample(&[1.0], &[0.0], &[3]).is_err());
    }
}
