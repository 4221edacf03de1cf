//! Python bindings. Thin wrappers over the euler-abelian crate: angle sets,
//! finite-type functions, admissible torus functions, and the probe/report
//! routines. Rich reports cross the boundary as JSON strings so the exact
//! values stay auditable; numeric results use native floats and complexes.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use euler_abelian::abelianize::{
    conjecture_probe, exact_moment, hull_contains_zero, spectrum, tilde, AdmissibleFunction,
    Spectrum,
};
use euler_abelian::euler::{
    angle_counts, forward, inverse, random_interior, shift_identity_residual, EulerAngles, Group,
    ShiftKind,
};
use euler_abelian::exact::ExactScalar;
use euler_abelian::finite_type::{expand, EntryPolynomial, FiniteTypeFunction};
use euler_abelian::generators::{ad_relation_residual, CMatrix};
use euler_abelian::haar::{
    density, density_from_jacobian, group_dim, mc_integrate, normalization, quad_integrate,
    sample,
};

fn err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_group(name: &str) -> PyResult<Group> {
    match name.to_ascii_lowercase().as_str() {
        "su" => Ok(Group::Su),
        "so" => Ok(Group::So),
        other => Err(err(format!("unknown group {other:?}, expected su or so"))),
    }
}

fn group_name(group: Group) -> &'static str {
    match group {
        Group::Su => "su",
        Group::So => "so",
    }
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(err("matrix must be square and non-empty"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Exact scalar rendered for Python: display text plus a float shadow.
fn scalar_pair(x: &ExactScalar) -> PyResult<(String, Complex64)> {
    let (re, im) = x.to_complex(12).map_err(err)?;
    Ok((x.display_string(), Complex64::new(re, im)))
}

/// Angle coordinates for one group element.
#[pyclass(name = "EulerAngles", skip_from_py_object)]
#[derive(Clone)]
struct PyEulerAngles {
    inner: EulerAngles,
}

#[pymethods]
impl PyEulerAngles {
    #[new]
    fn new(
        group: &str,
        n: usize,
        phi: Vec<f64>,
        psi: Vec<f64>,
        omega: Vec<f64>,
    ) -> PyResult<Self> {
        let group = parse_group(group)?;
        let inner = EulerAngles::new(group, n, phi, psi, omega).map_err(err)?;
        Ok(PyEulerAngles { inner })
    }

    #[staticmethod]
    fn zeros(group: &str, n: usize) -> PyResult<Self> {
        let group = parse_group(group)?;
        let inner = EulerAngles::zeros(group, n).map_err(err)?;
        Ok(PyEulerAngles { inner })
    }

    #[getter]
    fn group(&self) -> &'static str {
        group_name(self.inner.group)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi.clone()
    }

    #[getter]
    fn psi(&self) -> Vec<f64> {
        self.inner.psi.clone()
    }

    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.inner.omega.clone()
    }

    fn range_warnings(&self) -> Vec<String> {
        self.inner.range_warnings()
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "EulerAngles({}, n={}, phi={:?}, psi={:?}, omega={:?})",
            group_name(self.inner.group),
            self.inner.n,
            self.inner.phi,
            self.inner.psi,
            self.inner.omega
        )
    }
}

/// Canonical trigonometric polynomial in the angle coordinates.
#[pyclass(name = "FiniteTypeFunction", skip_from_py_object)]
#[derive(Clone)]
struct PyFiniteType {
    inner: FiniteTypeFunction,
}

#[pymethods]
impl PyFiniteType {
    /// Expand an entry polynomial such as "u11*cu11 - 1/2 u12" at the
    /// symbolic matrix entries of the given group.
    #[staticmethod]
    fn expand(poly: &str, group: &str, n: usize) -> PyResult<Self> {
        let group = parse_group(group)?;
        let p = EntryPolynomial::parse(poly)
            .ok_or_else(|| err(format!("cannot parse entry polynomial {poly:?}")))?;
        let inner = expand(&p, group, n).map_err(err)?;
        Ok(PyFiniteType { inner })
    }

    #[staticmethod]
    fn one(group: &str, n: usize) -> PyResult<Self> {
        let group = parse_group(group)?;
        Ok(PyFiniteType {
            inner: FiniteTypeFunction::one(group, n),
        })
    }

    #[getter]
    fn group(&self) -> &'static str {
        group_name(self.inner.group)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn num_terms(&self) -> usize {
        self.inner.num_terms()
    }

    fn eval(&self, a: &PyEulerAngles) -> PyResult<Complex64> {
        if a.inner.group != self.inner.group || a.inner.n != self.inner.n {
            return Err(err("angle set does not match the function's group"));
        }
        Ok(self.inner.eval(&a.inner))
    }

    fn add(&self, other: &PyFiniteType) -> PyResult<Self> {
        Ok(PyFiniteType {
            inner: self.inner.try_add(&other.inner).map_err(err)?,
        })
    }

    fn mul(&self, other: &PyFiniteType) -> PyResult<Self> {
        Ok(PyFiniteType {
            inner: self.inner.try_mul(&other.inner).map_err(err)?,
        })
    }

    fn pow(&self, p: u32) -> PyResult<Self> {
        Ok(PyFiniteType {
            inner: self.inner.try_pow(p).map_err(err)?,
        })
    }

    fn conj(&self) -> Self {
        PyFiniteType {
            inner: self.inner.conj(),
        }
    }

    /// Rewrite as an admissible function on the box-times-torus domain.
    fn tilde(&self) -> PyResult<PyAdmissible> {
        Ok(PyAdmissible {
            inner: tilde(&self.inner).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "FiniteTypeFunction({}, n={}, terms={})",
            group_name(self.inner.group),
            self.inner.n,
            self.inner.num_terms()
        )
    }
}

/// Laurent-style function of the torus variables with polynomial
/// coefficients in the box variables.
#[pyclass(name = "AdmissibleFunction", skip_from_py_object)]
#[derive(Clone)]
struct PyAdmissible {
    inner: AdmissibleFunction,
}

#[pymethods]
impl PyAdmissible {
    #[getter]
    fn group(&self) -> &'static str {
        group_name(self.inner.group)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn num_monomials(&self) -> usize {
        self.inner.num_monomials()
    }

    fn eval_angles(&self, a: &PyEulerAngles) -> PyResult<Complex64> {
        if a.inner.group != self.inner.group || a.inner.n != self.inner.n {
            return Err(err("angle set does not match the function's group"));
        }
        Ok(self.inner.eval_angles(&a.inner))
    }

    /// Exact Haar moment of the p-th power: (display text, float shadow).
    fn exact_moment(&self, p: u32) -> PyResult<(String, Complex64)> {
        let m = exact_moment(&self.inner, p).map_err(err)?;
        scalar_pair(&m)
    }

    /// Exponent spectrum as JSON.
    fn spectrum_json(&self) -> String {
        spectrum(&self.inner).to_json().to_string()
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "AdmissibleFunction({}, n={}, monomials={})",
            group_name(self.inner.group),
            self.inner.n,
            self.inner.num_monomials()
        )
    }
}

/// Evaluate the parametrization: angle set to matrix rows.
#[pyfunction(name = "forward")]
fn py_forward(a: &PyEulerAngles) -> Vec<Vec<Complex64>> {
    matrix_to_rows(&forward(&a.inner))
}

/// Recover angles from a group element given as nested rows.
#[pyfunction(name = "inverse")]
fn py_inverse(group: &str, n: usize, rows: Vec<Vec<Complex64>>) -> PyResult<PyEulerAngles> {
    let group = parse_group(group)?;
    let m = matrix_from_rows(rows)?;
    Ok(PyEulerAngles {
        inner: inverse(group, n, &m).map_err(err)?,
    })
}

/// Draw Haar-distributed angle sets; deterministic in the seed.
#[pyfunction(name = "sample")]
#[pyo3(signature = (group, n, count=1, seed=0))]
fn py_sample(group: &str, n: usize, count: usize, seed: u64) -> PyResult<Vec<PyEulerAngles>> {
    let group = parse_group(group)?;
    if n < 2 {
        return Err(err(format!("rank must be at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| PyEulerAngles {
            inner: sample(group, n, &mut rng),
        })
        .collect())
}

/// One interior point drawn uniformly from the open coordinate box.
#[pyfunction(name = "random_interior")]
#[pyo3(signature = (group, n, seed=0))]
fn py_random_interior(group: &str, n: usize, seed: u64) -> PyResult<PyEulerAngles> {
    let group = parse_group(group)?;
    if n < 2 {
        return Err(err(format!("rank must be at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PyEulerAngles {
        inner: random_interior(group, n, &mut rng),
    })
}

#[pyfunction(name = "density")]
fn py_density(a: &PyEulerAngles) -> f64 {
    density(a.inner.group, a.inner.n, &a.inner)
}

#[pyfunction(name = "density_from_jacobian")]
fn py_density_from_jacobian(a: &PyEulerAngles) -> PyResult<f64> {
    density_from_jacobian(a.inner.group, a.inner.n, &a.inner).map_err(err)
}

#[pyfunction(name = "group_dim")]
fn py_group_dim(group: &str, n: usize) -> PyResult<usize> {
    Ok(group_dim(parse_group(group)?, n))
}

#[pyfunction(name = "angle_counts")]
fn py_angle_counts(group: &str, n: usize) -> PyResult<(usize, usize, usize)> {
    Ok(angle_counts(parse_group(group)?, n))
}

/// Monte Carlo Haar integral of an entry polynomial: (value, stderr).
#[pyfunction(name = "mc_integrate")]
#[pyo3(signature = (poly, group, n, samples=100_000, seed=0))]
fn py_mc_integrate(
    poly: &str,
    group: &str,
    n: usize,
    samples: u64,
    seed: u64,
) -> PyResult<(Complex64, f64)> {
    let group = parse_group(group)?;
    let p = EntryPolynomial::parse(poly)
        .ok_or_else(|| err(format!("cannot parse entry polynomial {poly:?}")))?;
    let f = expand(&p, group, n).map_err(err)?;
    let eval = f.evaluator();
    mc_integrate(|a| eval(a), group, n, samples, seed).map_err(err)
}

/// Tensor-quadrature Haar integral of an entry polynomial.
#[pyfunction(name = "quad_integrate")]
#[pyo3(signature = (poly, group, n, orders=vec![16]))]
fn py_quad_integrate(poly: &str, group: &str, n: usize, orders: Vec<usize>) -> PyResult<Complex64> {
    let group = parse_group(group)?;
    let p = EntryPolynomial::parse(poly)
        .ok_or_else(|| err(format!("cannot parse entry polynomial {poly:?}")))?;
    let f = expand(&p, group, n).map_err(err)?;
    let eval = f.evaluator();
    quad_integrate(|a| eval(a), group, n, &orders).map_err(err)
}

/// Exact normalization constants with the published values: JSON report.
#[pyfunction(name = "normalization_json")]
fn py_normalization_json(group: &str, n: usize) -> PyResult<String> {
    let group = parse_group(group)?;
    let report = normalization(group, n).map_err(err)?;
    let level_json = |x: &ExactScalar| -> PyResult<serde_json::Value> {
        let (text, z) = scalar_pair(x)?;
        Ok(serde_json::json!({ "text": text, "float": [z.re, z.im] }))
    };
    let mut levels = Vec::new();
    for lv in &report.levels {
        levels.push(serde_json::json!({
            "level": lv.level,
            "computed": level_json(&lv.computed)?,
            "published": level_json(&lv.published)?,
            "ratio": level_json(&lv.ratio)?,
        }));
    }
    let out = serde_json::json!({
        "group": group_name(group),
        "n": n,
        "levels": levels,
        "total_computed": level_json(&report.total_computed)?,
        "total_published": level_json(&report.total_published)?,
        "total_ratio": level_json(&report.total_ratio)?,
    });
    Ok(out.to_string())
}

/// Residual of one diagonal-shift identity of the parametrization.
#[pyfunction(name = "shift_identity_residual")]
fn py_shift_identity_residual(kind: &str, n: usize, z: f64, a: &PyEulerAngles) -> PyResult<f64> {
    let kind = ShiftKind::parse(kind)
        .ok_or_else(|| err(format!("unknown shift kind {kind:?}")))?;
    shift_identity_residual(kind, n, z, &a.inner).map_err(err)
}

/// Residual of one adjoint-action relation between the generators.
#[pyfunction(name = "ad_relation_residual")]
fn py_ad_relation_residual(
    relation: u8,
    p: usize,
    q: usize,
    n: usize,
    phi: f64,
    psi: f64,
) -> PyResult<f64> {
    ad_relation_residual(relation, p, q, n, (phi, psi)).map_err(err)
}

/// Convex hull membership of the origin for a spectrum JSON document.
#[pyfunction(name = "hull_contains_zero_json")]
fn py_hull_contains_zero_json(spectrum_json: &str) -> PyResult<String> {
    let v: serde_json::Value = serde_json::from_str(spectrum_json).map_err(err)?;
    let s = Spectrum::from_json(&v).map_err(err)?;
    let verdict = hull_contains_zero(&s).map_err(err)?;
    let out = serde_json::json!({
        "contains_zero": verdict.contains_zero(),
        "certificate": verdict.to_json(),
    });
    Ok(out.to_string())
}

/// Run the abelian moment probe on an entry polynomial: JSON report.
#[pyfunction(name = "conjecture_probe_json")]
#[pyo3(signature = (poly, group, n, pmax=3))]
fn py_conjecture_probe_json(poly: &str, group: &str, n: usize, pmax: u32) -> PyResult<String> {
    let group = parse_group(group)?;
    let p = EntryPolynomial::parse(poly)
        .ok_or_else(|| err(format!("cannot parse entry polynomial {poly:?}")))?;
    let f = expand(&p, group, n).map_err(err)?;
    let report = conjecture_probe(&f, pmax).map_err(err)?;
    Ok(report.to_json().to_string())
}

#[pymodule]
fn euler_abelian_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEulerAngles>()?;
    m.add_class::<PyFiniteType>()?;
    m.add_class::<PyAdmissible>()?;
    m.add_function(wrap_pyfunction!(py_forward, m)?)?;
    m.add_function(wrap_pyfunction!(py_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(py_sample, m)?)?;
    m.add_function(wrap_pyfunction!(py_random_interior, m)?)?;
    m.add_function(wrap_pyfunction!(py_density, m)?)?;
    m.add_function(wrap_pyfunction!(py_density_from_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(py_group_dim, m)?)?;
    m.add_function(wrap_pyfunction!(py_angle_counts, m)?)?;
    m.add_function(wrap_pyfunction!(py_mc_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(py_quad_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(py_normalization_json, m)?)?;
    m.add_function(wrap_pyfunction!(py_shift_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(py_ad_relation_residual, m)?)?;
    m.add_function(wrap_pyfunction!(py_hull_contains_zero_json, m)?)?;
    m.add_function(wrap_pyfunction!(py_conjecture_probe_json, m)?)?;
    Ok(())
}
