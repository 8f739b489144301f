//! Finite split Hamiltonians `H(λ) = diag(E) + λ W` and the numeric side of
//! the symbolic series: values of `g_n^(l)`, a brute-force Laurent oracle for
//! `(λ°_n, λ̇°_n)`, and a diagonalization-based Taylor oracle for `E_0(λ)`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rspt::{self, PTOrderResult};
use crate::symexpr::{GExpression, GVar};

const SYMMETRY_TOL: f64 = 1e-12;

/// Unperturbed spectrum `E_0 = 0 < E_k` and a real symmetric perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    energies: DVector<f64>,
    wmat: DMatrix<f64>,
}

impl SpectralModel {
    pub fn new(energies: Vec<f64>, wmat: DMatrix<f64>) -> Result<Self> {
        let d = energies.len();
        if d == 0 {
            return Err(Error::InvalidModel("empty spectrum".into()));
        }
        if wmat.nrows() != d || wmat.ncols() != d {
            return Err(Error::InvalidModel(format!(
                "perturbation is {}x{}, spectrum has {d} levels",
                wmat.nrows(),
                wmat.ncols()
            )));
        }
        if energies[0] != 0.0 {
            return Err(Error::InvalidModel(format!(
                "unperturbed ground energy must be exactly 0, got {}",
                energies[0]
            )));
        }
        if let Some((k, e)) = energies
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, e)| e.is_nan() || **e <= 0.0)
        {
            return Err(Error::InvalidModel(format!(
                "excited level {k} has energy {e}; the ground state must be non-degenerate"
            )));
        }
        if wmat.iter().any(|w| !w.is_finite()) || energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidModel("non-finite entries".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if (wmat[(i, j)] - wmat[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidModel(format!(
                        "perturbation is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SpectralModel {
            energies: DVector::from_vec(energies),
            wmat,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(energies: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidModel(
                "perturbation matrix is not square".into(),
            ));
        }
        let wmat = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        SpectralModel::new(energies, wmat)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn wmat(&self) -> &DMatrix<f64> {
        &self.wmat
    }

    /// Distance from the ground level to the rest of the unperturbed spectrum.
    pub fn ground_gap(&self) -> f64 {
        self.energies
            .iter()
            .skip(1)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest spacing between any two unperturbed levels.
    pub fn smallest_gap(&self) -> f64 {
        let mut e: Vec<f64> = self.energies.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest |eigenvalue| of `W`.
    pub fn perturbation_norm(&self) -> f64 {
        self.wmat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn hamiltonian(&self, lambda: f64) -> DMatrix<f64> {
        let mut h = &self.wmat * lambda;
        for (k, e) in self.energies.iter().enumerate() {
            h[(k, k)] += e;
        }
        h
    }

    /// Lowest eigenvalue of `diag(E) + λ W` by dense diagonalization.
    pub fn exact_ground_energy(&self, lambda: f64) -> f64 {
        self.hamiltonian(lambda)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `g_n^(l)` for this model; see [`g_value`].
    pub fn g(&self, n: usize, l: usize) -> Result<f64> {
        g_value(self, n, l)
    }

    /// Evaluate an expression with every variable bound through [`g_value`].
    pub fn evaluate(&self, e: &GExpression) -> Result<f64> {
        let bindings = self.bindings(e.variables())?;
        e.evaluate(&bindings)
    }

    fn bindings<I: IntoIterator<Item = GVar>>(&self, vars: I) -> Result<HashMap<GVar, f64>> {
        vars.into_iter()
            .map(|v| Ok((v, g_value(self, v.order() as usize, v.deriv() as usize)?)))
            .collect()
    }
}

/// Complete homogeneous symmetric polynomial `h_l(X_1, …, X_m)`.
///
/// Uses `h_l(X_1..X_m) = h_l(X_1..X_{m-1}) + X_m h_{l-1}(X_1..X_m)`.
pub fn complete_homogeneous(l: usize, xs: &[f64]) -> f64 {
    let mut h = vec![0.0; l + 1];
    h[0] = 1.0;
    for &x in xs {
        for s in 1..=l {
            h[s] += x * h[s - 1];
        }
    }
    h[l]
}

/// `g_n^(l) = d^l g_n(z)/dz^l` at `z = 0`.
///
/// Equals `l! (-1)^l Σ' W_{0k_{n-1}} ⋯ W_{k_1 0} / (E_{k_{n-1}} ⋯ E_{k_1})
/// h_l(1/E_{k_1}, …, 1/E_{k_{n-1}})`. The primed sum is evaluated as a chain
/// of matrix-vector products on the excited subspace; the `l` derivative
/// slots are distributed over the denominators with the same prefix
/// recurrence as [`complete_homogeneous`].
pub fn g_value(model: &SpectralModel, n: usize, l: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::ArgumentRange("g order must be >= 1".into()));
    }
    if n == 1 {
        return Ok(if l == 0 { model.wmat[(0, 0)] } else { 0.0 });
    }
    let d = model.dim();
    if d < 2 {
        return Ok(0.0);
    }
    let m = d - 1;
    let inv_e = DVector::from_fn(m, |k, _| 1.0 / model.energies[k + 1]);
    let w_excited = model.wmat.view((1, 1), (m, m)).into_owned();
    let w_from_ground = DVector::from_fn(m, |k, _| model.wmat[(k + 1, 0)]);
    let w_to_ground = DVector::from_fn(m, |k, _| model.wmat[(0, k + 1)]);

    // slots[s]: chain so far with s derivative slots placed on its denominators.
    let mut slots: Vec<DVector<f64>> = vec![DVector::zeros(m); l + 1];
    slots[0] = w_from_ground;
    for step in 0..n - 1 {
        if step > 0 {
            for v in slots.iter_mut() {
                *v = &w_excited * &*v;
            }
        }
        let mut placed: Vec<DVector<f64>> = Vec::with_capacity(l + 1);
        for s in 0..=l {
            let mut v = slots[s].clone();
            if s > 0 {
                v += &placed[s - 1];
            }
            v.component_mul_assign(&inv_e);
            placed.push(v);
        }
        slots = placed;
    }
    let chain = w_to_ground.dot(&slots[l]);
    let factorial: f64 = (1..=l).map(|k| k as f64).product();
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * factorial * chain)
}

/// Circle used to extract Laurent coefficients of `G_n(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaurentGrid {
    /// Circle radius as a fraction of the ground gap; must be below 1.
    pub radius_fraction: f64,
    pub points: usize,
}

impl Default for LaurentGrid {
    fn default() -> Self {
        LaurentGrid {
            radius_fraction: 0.5,
            points: 64,
        }
    }
}

/// Literal multiple-index sum `G_n(z)` including ground-state visits.
pub fn chain_sum(model: &SpectralModel, n: usize, z: Complex64) -> Complex64 {
    let w = &model.wmat;
    if n == 1 {
        return Complex64::new(w[(0, 0)], 0.0);
    }
    let d = model.dim();
    let denom: Vec<Complex64> = model.energies.iter().map(|&e| 1.0 / (e + z)).collect();
    let depth = n - 1;
    let mut idx = vec![0usize; depth];
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        // idx[0] = k_1 (next to the right-hand ground state), idx[depth-1] = k_{n-1}.
        let mut term = Complex64::new(w[(0, idx[depth - 1])], 0.0);
        for i in (1..depth).rev() {
            term *= w[(idx[i], idx[i - 1])];
        }
        term *= w[(idx[0], 0)];
        for &k in &idx {
            term *= denom[k];
        }
        total += term;

        let mut pos = 0;
        loop {
            idx[pos] += 1;
            if idx[pos] < d {
                break;
            }
            idx[pos] = 0;
            pos += 1;
            if pos == depth {
                return total;
            }
        }
    }
}

/// `(λ°_n, λ̇°_n)` as the `z^1` and `z^0` Laurent coefficients of `G_n(z)`,
/// from the brute-force chain sum on a circle around the origin.
pub fn laurent_oracle(model: &SpectralModel, n: usize) -> Result<(f64, f64)> {
    laurent_oracle_with(model, n, LaurentGrid::default())
}

pub fn laurent_oracle_with(
    model: &SpectralModel,
    n: usize,
    grid: LaurentGrid,
) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::ArgumentRange("order must be >= 1".into()));
    }
    if !(grid.radius_fraction > 0.0 && grid.radius_fraction < 1.0) {
        return Err(Error::FitConditioning(format!(
            "circle radius fraction {} must lie in (0, 1)",
            grid.radius_fraction
        )));
    }
    // Poles reach z^{-(n-1)}; the grid must resolve z^{-(n-1)} .. z^{1}
    // with room to spare against aliasing.
    if grid.points < 2 * n + 8 {
        return Err(Error::FitConditioning(format!(
            "{} points cannot resolve the Laurent series of order {n}",
            grid.points
        )));
    }
    let gap = model.ground_gap();
    let radius = if gap.is_finite() {
        grid.radius_fraction * gap
    } else {
        1.0
    };
    let mut a1 = Complex64::new(0.0, 0.0);
    let mut a0 = Complex64::new(0.0, 0.0);
    for j in 0..grid.points {
        let phase = 2.0 * PI * j as f64 / grid.points as f64;
        let z = Complex64::from_polar(radius, phase);
        let g = chain_sum(model, n, z);
        a0 += g;
        a1 += g / z;
    }
    let m = grid.points as f64;
    Ok(((a1 / m).re, (a0 / m).re))
}

/// Taylor coefficients `c_1..c_N` of `E_0(λ)` at `λ = 0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TaylorCoefficients {
    pub coeffs: Vec<f64>,
    /// Aliasing and noise level of the fit, relative to `max |E_0|` on the grid.
    pub fit_residual: f64,
    /// Radius of the coupling circle used.
    pub radius: f64,
}

impl TaylorCoefficients {
    pub fn is_trustworthy(&self, threshold: f64) -> bool {
        self.fit_residual < threshold
    }
}

/// Coupling grid for [`taylor_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorGrid {
    /// Radius as a fraction of `gap / ‖W‖`. Kato's bound keeps the ground
    /// level isolated for fractions below 1/2.
    pub radius_fraction: f64,
    pub points: usize,
}

impl Default for TaylorGrid {
    fn default() -> Self {
        TaylorGrid {
            radius_fraction: 0.25,
            points: 128,
        }
    }
}

/// Ground-state Taylor coefficients by diagonalizing `H(λ)` on a grid of
/// couplings and fitting a polynomial; see [`taylor_oracle_with`].
pub fn taylor_oracle(model: &SpectralModel, order: usize) -> Result<TaylorCoefficients> {
    taylor_oracle_with(model, order, TaylorGrid::default())
}

/// The grid is the set of `M` complex couplings `λ_j = r e^{2πij/M}`,
/// symmetric under `λ → -λ`. The least-squares polynomial fit on roots of
/// unity is the discrete Fourier transform, so `c_n` is read off directly.
/// Each `E_0(λ_j)` comes from shifted inverse iteration continued around the
/// circle, finished with the bilinear Rayleigh quotient, whose absolute error
/// scales with `|λ| ‖W‖` rather than with `‖H‖`.
pub fn taylor_oracle_with(
    model: &SpectralModel,
    order: usize,
    grid: TaylorGrid,
) -> Result<TaylorCoefficients> {
    if order < 1 {
        return Err(Error::ArgumentRange("order must be >= 1".into()));
    }
    if grid.points < 4 * order + 8 || !grid.points.is_multiple_of(2) {
        return Err(Error::ArgumentRange(format!(
            "coupling grid needs an even number of points >= {}",
            4 * order + 8
        )));
    }
    let norm = model.perturbation_norm();
    if norm == 0.0 {
        return Ok(TaylorCoefficients {
            coeffs: vec![0.0; order],
            fit_residual: 0.0,
            radius: 0.0,
        });
    }
    let gap = model.ground_gap();
    if !gap.is_finite() {
        // One level: E_0(λ) = λ W_00.
        let mut coeffs = vec![0.0; order];
        coeffs[0] = model.wmat[(0, 0)];
        return Ok(TaylorCoefficients {
            coeffs,
            fit_residual: 0.0,
            radius: 0.0,
        });
    }
    let radius = grid.radius_fraction * gap / norm;
    let d = model.dim();
    let diag: Vec<Complex64> = model
        .energies
        .iter()
        .map(|&e| Complex64::new(e, 0.0))
        .collect();
    let wc: DMatrix<Complex64> = model.wmat.map(|x| Complex64::new(x, 0.0));

    let mut vec = DVector::from_element(d, Complex64::new(0.0, 0.0));
    vec[0] = Complex64::new(1.0, 0.0);
    let mut shift = Complex64::new(0.0, 0.0);
    let mut values = Vec::with_capacity(grid.points);
    for j in 0..grid.points {
        let lambda = Complex64::from_polar(radius, 2.0 * PI * j as f64 / grid.points as f64);
        let mut h = &wc * lambda;
        for k in 0..d {
            h[(k, k)] += diag[k];
        }
        let (e, v) = inverse_iteration(&h, vec, shift)?;
        if e.norm() > 0.5 * gap {
            return Err(Error::Degeneracy(format!(
                "ground level drifted to {e} at coupling {lambda}; gap is {gap}"
            )));
        }
        // On the real axis the tracked level must be the lowest one.
        if j == 0 || j * 2 == grid.points {
            let lowest = model.exact_ground_energy(lambda.re);
            if (lowest - e.re).abs() > 1e-8 * (1.0 + lowest.abs()) {
                return Err(Error::Degeneracy(format!(
                    "tracked level {} is not the lowest ({lowest}) at coupling {}",
                    e.re, lambda.re
                )));
            }
        }
        values.push(e);
        vec = v;
        shift = e;
    }

    let m = grid.points;
    let coefficient = |n: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, val) in values.iter().enumerate() {
            let phase = -2.0 * PI * (j * n % m) as f64 / m as f64;
            acc += val * Complex64::from_polar(1.0, phase);
        }
        acc / m as f64
    };
    let scale = values
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut coeffs = Vec::with_capacity(order);
    let mut residual = 0.0f64;
    for n in 1..=order {
        let a = coefficient(n);
        residual = residual.max(a.im.abs());
        coeffs.push(a.re / radius.powi(n as i32));
    }
    for n in (m / 2 - 4)..=(m / 2) {
        residual = residual.max(coefficient(n).norm());
    }
    Ok(TaylorCoefficients {
        coeffs,
        fit_residual: residual / scale,
        radius,
    })
}

fn inverse_iteration(
    h: &DMatrix<Complex64>,
    start: DVector<Complex64>,
    shift: Complex64,
) -> Result<(Complex64, DVector<Complex64>)> {
    let d = h.nrows();
    let scale = 1.0 + h.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    let rayleigh = |v: &DVector<Complex64>| (h * v).dot(v) / v.dot(v);
    let residual = |v: &DVector<Complex64>, e: Complex64| (h * v - v * e).norm() / v.norm();
    let mut sigma = shift;
    let lu = loop {
        let mut shifted = h.clone();
        for k in 0..d {
            shifted[(k, k)] -= sigma;
        }
        let lu = shifted.lu();
        if lu.is_invertible() {
            break lu;
        }
        sigma += Complex64::new(1e-9 * scale, 0.0);
    };
    let mut v = start;
    for _ in 0..200 {
        let Some(y) = lu.solve(&v) else { break };
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        v = y / Complex64::new(norm, 0.0);
        if residual(&v, rayleigh(&v)) <= 1e-14 * scale {
            break;
        }
    }
    let e = rayleigh(&v);
    let r = residual(&v, e);
    if r < 1e-10 * scale {
        Ok((e, v))
    } else {
        Err(Error::Degeneracy(format!(
            "inverse iteration did not converge (residual {r:e})"
        )))
    }
}

/// `ε_1..ε_N` for a model: generate the symbolic series, bind every `g` via
/// [`g_value`], evaluate.
pub fn evaluate_epsilons(model: &SpectralModel, order: usize) -> Result<Vec<f64>> {
    let series = rspt::epsilon_series(order)?;
    evaluate_series(model, &series)
}

/// Evaluate already generated orders.
pub fn evaluate_series(model: &SpectralModel, series: &[PTOrderResult]) -> Result<Vec<f64>> {
    let bindings = model.bindings(series.iter().flat_map(|r| r.epsilon.variables()))?;
    series
        .iter()
        .map(|r| r.epsilon.evaluate(&bindings))
        .collect()
}

/// Matrix of `x` in the oscillator basis (`ħ = m = ω = 1`).
pub fn position_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            ((i + 1) as f64 / 2.0).sqrt()
        } else if i == j + 1 {
            ((j + 1) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    })
}

/// Truncated `x^4` in the oscillator basis. Built in a padded basis so the
/// returned `dim × dim` block carries no truncation artefacts.
pub fn quartic_matrix(dim: usize) -> DMatrix<f64> {
    let x = position_matrix(dim + 4);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    x4.view((0, 0), (dim, dim)).into_owned()
}

/// Harmonic oscillator (`E_k = k` after shifting out the zero-point energy)
/// perturbed by `λq x^4`.
pub fn build_anharmonic_model(basis_size: usize, quartic_coupling: f64) -> Result<SpectralModel> {
    if basis_size < 20 {
        return Err(Error::ArgumentRange(format!(
            "anharmonic basis needs at least 20 states, got {basis_size}"
        )));
    }
    let energies = (0..basis_size).map(|k| k as f64).collect();
    SpectralModel::new(energies, quartic_matrix(basis_size) * quartic_coupling)
}

/// Parameters of [`random_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelSpec {
    pub dim: usize,
    pub energy_min: f64,
    pub energy_max: f64,
    pub coupling: f64,
    pub min_gap: f64,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        RandomModelSpec {
            dim: 8,
            energy_min: 0.5,
            energy_max: 3.0,
            coupling: 0.3,
            min_gap: 0.3,
        }
    }
}

/// Random model with sorted excited levels in `[energy_min, energy_max]`,
/// all spacings at least `min_gap`, and symmetrized couplings in
/// `[-coupling, coupling]`.
///
/// Levels are drawn from the exact conditional law of rejection sampling:
/// sorted uniforms on the shortened interval, then spread by `min_gap`.
pub fn random_model<R: Rng + ?Sized>(spec: &RandomModelSpec, rng: &mut R) -> Result<SpectralModel> {
    let d = spec.dim;
    if d < 2 {
        return Err(Error::ArgumentRange(
            "random models need at least 2 levels".into(),
        ));
    }
    let slack = spec.energy_max - spec.energy_min - (d as f64 - 2.0) * spec.min_gap;
    if slack < 0.0 || spec.energy_min < spec.min_gap {
        return Err(Error::ArgumentRange(format!(
            "{} levels with spacing {} do not fit in [{}, {}]",
            d - 1,
            spec.min_gap,
            spec.energy_min,
            spec.energy_max
        )));
    }
    let mut u: Vec<f64> = (0..d - 1).map(|_| rng.random::<f64>() * slack).collect();
    u.sort_by(|a, b| a.total_cmp(b));
    let mut energies = vec![0.0];
    energies.extend(
        u.iter()
            .enumerate()
            .map(|(i, x)| spec.energy_min + x + i as f64 * spec.min_gap),
    );
    let raw = DMatrix::from_fn(d, d, |_, _| {
        (2.0 * rng.random::<f64>() - 1.0) * spec.coupling
    });
    let wmat = (&raw + raw.transpose()) * 0.5;
    SpectralModel::new(energies, wmat)
}
