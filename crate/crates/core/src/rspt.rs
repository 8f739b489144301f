//! Symbolic generation of the ground-state energy corrections `ε_n`.
//!
//! `G_n(z)`, the Laplace-space chain sum, is organised by the number of
//! ground-state visits into ordinary Bell polynomials of the `g_m(z)`:
//! `G_n(z) = Σ_l z^{1-l} B_{n,l}(g_1, …, g_{n-l+1})`. The constant (`λ°_n`)
//! and linear-in-τ (`λ̇°_n`) asymptotic parts of `λ_n(τ)` are the `z^1` and
//! `z^0` Laurent coefficients of `G_n`. Reduced cumulants follow from the
//! moment recursion, and `ε_n = (-1)^{n+1} γ̇°_n`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::symexpr::{GExpression, GMonomial, GVar};

/// Default cap on the generated order; expressions grow quickly beyond it.
pub const DEFAULT_ORDER_LIMIT: usize = 10;

/// Everything the recursion produces at one perturbative order.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PTOrderResult {
    pub order: usize,
    /// `λ°_n`
    pub lambda0: GExpression,
    /// `λ̇°_n`
    pub lambdadot0: GExpression,
    /// `γ°_n`
    pub gamma0: GExpression,
    /// `γ̇°_n`
    pub gammadot0: GExpression,
    /// `ε_n = (-1)^{n+1} γ̇°_n`
    pub epsilon: GExpression,
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Ordinary Bell polynomial `B_{n,l}(g_1, …, g_{n-l+1})`, all at `z = 0`.
///
/// Sums `l!/(j_1!⋯j_K!) Π g_k^{j_k}` over non-negative `j` with
/// `Σ j_k = l` and `Σ k j_k = n`, found by direct enumeration.
pub fn ordinary_bell(n: usize, l: usize) -> Result<GExpression> {
    if l < 1 || l > n {
        return Err(Error::ArgumentRange(format!(
            "ordinary Bell polynomial needs 1 <= l <= n, got n = {n}, l = {l}"
        )));
    }
    let max_part = n - l + 1;
    let l_fact = factorial(l);
    let mut out = GExpression::zero();
    let mut counts = vec![0usize; max_part + 1];
    enumerate_parts(max_part, l, n, &mut counts, &mut |js| {
        let denom = js
            .iter()
            .skip(1)
            .fold(BigInt::one(), |acc, &j| acc * factorial(j));
        let mono = GMonomial::from_factors(
            js.iter()
                .enumerate()
                .skip(1)
                .filter(|(_, &j)| j > 0)
                .map(|(k, &j)| (GVar::g(k as u32), j as u32)),
        );
        out.add_term(mono, BigRational::new(l_fact.clone(), denom));
    });
    Ok(out)
}

// Fills counts[1..=part] from the largest part down so that the remaining
// count and weight are met exactly.
fn enumerate_parts<F: FnMut(&[usize])>(
    part: usize,
    count: usize,
    weight: usize,
    counts: &mut Vec<usize>,
    visit: &mut F,
) {
    if part == 1 {
        if count == weight {
            counts[1] = count;
            visit(counts);
            counts[1] = 0;
        }
        return;
    }
    let max_j = count.min(weight / part);
    for j in 0..=max_j {
        counts[part] = j;
        enumerate_parts(part - 1, count - j, weight - j * part, counts, visit);
    }
    counts[part] = 0;
}

/// `(λ°_n, λ̇°_n)` from the Laurent coefficients of `G_n(z)`:
/// `λ°_n = Σ_l B_{nl}^{(l)}/l!` and `λ̇°_n = Σ_l B_{nl}^{(l-1)}/(l-1)!`.
pub fn lambda_naughts(n: usize) -> Result<(GExpression, GExpression)> {
    if n < 1 {
        return Err(Error::ArgumentRange("order must be >= 1".into()));
    }
    let mut lambda0 = GExpression::zero();
    let mut lambdadot0 = GExpression::zero();
    for l in 1..=n {
        let bell = ordinary_bell(n, l)?;
        let d_lm1 = bell.differentiate_z_n(l - 1);
        let d_l = d_lm1.differentiate_z();
        let inv_l = BigRational::new(BigInt::one(), factorial(l));
        let inv_lm1 = BigRational::new(BigInt::one(), factorial(l - 1));
        lambda0 = lambda0 + d_l.scale(&inv_l);
        lambdadot0 = lambdadot0 + d_lm1.scale(&inv_lm1);
    }
    Ok((lambda0, lambdadot0))
}

fn cached(cache: &[PTOrderResult], order: usize) -> Result<&PTOrderResult> {
    cache
        .iter()
        .find(|r| r.order == order)
        .ok_or(Error::MissingCache(order))
}

/// `(γ°_n, γ̇°_n)` by the reduced-cumulant recursion on the asymptotic
/// constants. `cache` must hold orders `1..n`.
pub fn gamma_naughts(n: usize, cache: &[PTOrderResult]) -> Result<(GExpression, GExpression)> {
    let (lambda0, lambdadot0) = lambda_naughts(n)?;
    gamma_from_lambdas(n, lambda0, lambdadot0, cache)
}

fn gamma_from_lambdas(
    n: usize,
    lambda0: GExpression,
    lambdadot0: GExpression,
    cache: &[PTOrderResult],
) -> Result<(GExpression, GExpression)> {
    let mut gamma0 = lambda0;
    let mut gammadot0 = lambdadot0;
    for k in 1..n {
        let low = cached(cache, n - k)?;
        let lam = cached(cache, k)?;
        let w = ratio(n - k, n);
        gamma0 = gamma0 - (&low.gamma0 * &lam.lambda0).scale(&w);
        let mixed = &(&low.gammadot0 * &lam.lambda0) + &(&low.gamma0 * &lam.lambdadot0);
        gammadot0 = gammadot0 - mixed.scale(&w);
    }
    Ok((gamma0, gammadot0))
}

/// Memoised bottom-up generator of [`PTOrderResult`]s.
#[derive(Debug, Clone)]
pub struct PerturbationSeries {
    limit: usize,
    results: Vec<PTOrderResult>,
}

impl Default for PerturbationSeries {
    fn default() -> Self {
        PerturbationSeries::new()
    }
}

impl PerturbationSeries {
    pub fn new() -> Self {
        PerturbationSeries::with_limit(DEFAULT_ORDER_LIMIT)
    }

    pub fn with_limit(limit: usize) -> Self {
        PerturbationSeries {
            limit,
            results: Vec::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Orders `1..=n`, generating whatever is not cached yet.
    pub fn up_to(&mut self, n: usize) -> Result<&[PTOrderResult]> {
        if n < 1 {
            return Err(Error::ArgumentRange("order must be >= 1".into()));
        }
        if n > self.limit {
            return Err(Error::ArgumentRange(format!(
                "order {n} exceeds the configured limit {}",
                self.limit
            )));
        }
        while self.results.len() < n {
            let order = self.results.len() + 1;
            let (lambda0, lambdadot0) = lambda_naughts(order)?;
            let (gamma0, gammadot0) =
                gamma_from_lambdas(order, lambda0.clone(), lambdadot0.clone(), &self.results)?;
            let epsilon = if order % 2 == 1 {
                gammadot0.clone()
            } else {
                -&gammadot0
            };
            self.results.push(PTOrderResult {
                order,
                lambda0,
                lambdadot0,
                gamma0,
                gammadot0,
                epsilon,
            });
        }
        Ok(&self.results[..n])
    }

    pub fn order(&mut self, n: usize) -> Result<&PTOrderResult> {
        Ok(&self.up_to(n)?[n - 1])
    }
}

/// `ε_1 … ε_N`; element `i` holds order `i + 1`.
pub fn epsilon_series(n: usize) -> Result<Vec<PTOrderResult>> {
    let mut series = PerturbationSeries::with_limit(n.max(DEFAULT_ORDER_LIMIT));
    Ok(series.up_to(n)?.to_vec())
}

const INDEX_NAMES: [&str; 10] = ["k", "l", "m", "p", "q", "r", "s", "t", "u", "v"];

fn index_name(i: usize) -> String {
    INDEX_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("k{}", i + 1))
}

/// Sum-over-states text for one variable, without its `l!(-1)^l` prefactor.
fn render_gvar_body(v: GVar) -> String {
    let n = v.order() as usize;
    let l = v.deriv();
    if n == 1 {
        return "W_{00}".to_string();
    }
    let idx: Vec<String> = (0..n - 1).map(index_name).collect();
    let mut chain = vec![format!("W_{{0{}}}", idx[0])];
    for w in idx.windows(2) {
        chain.push(format!("W_{{{}{}}}", w[0], w[1]));
    }
    chain.push(format!("W_{{{}0}}", idx[n - 2]));
    let sum = if idx.len() == 1 {
        format!("Σ'_{}", idx[0])
    } else {
        format!("Σ'_{{{}}}", idx.join(","))
    };
    if idx.len() == 1 {
        let denom = if l == 0 {
            format!("E_{}", idx[0])
        } else {
            format!("E_{}^{}", idx[0], l + 1)
        };
        return format!("{sum} {} / {denom}", chain.join(" "));
    }
    let denom = idx
        .iter()
        .map(|i| format!("E_{i}"))
        .collect::<Vec<_>>()
        .join(" ");
    let h = if l == 0 {
        String::new()
    } else {
        let args = idx
            .iter()
            .map(|i| format!("1/E_{i}"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(" h_{l}({args})")
    };
    format!("{sum} {}{h} / ({denom})", chain.join(" "))
}

/// Replace every `g_m^(k)` by its primed sum over excited states.
///
/// Purely textual; `h_l` is the complete homogeneous symmetric polynomial
/// of the listed inverse excitation energies.
pub fn render_sum_over_states(e: &GExpression) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in e.terms().enumerate() {
        // Fold the l!(-1)^l prefactors into the numeric coefficient.
        let mut coeff = c.clone();
        for (v, exp) in m.factors() {
            if v.deriv() > 0 {
                let pre = factorial(v.deriv() as usize);
                let pre = if v.deriv() % 2 == 1 { -pre } else { pre };
                for _ in 0..exp {
                    coeff *= BigRational::from_integer(pre.clone());
                }
            }
        }
        let negative = coeff.is_negative();
        match (i, negative) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        let abs = coeff.abs();
        let single = m.degree() == 1;
        let mut parts = Vec::new();
        if !abs.is_one() || m.is_one() {
            parts.push(abs.to_string());
        }
        for (v, exp) in m.factors() {
            let body = render_gvar_body(v);
            let wrapped = if single || v.order() == 1 {
                body
            } else {
                format!("[{body}]")
            };
            if exp > 1 {
                parts.push(format!("{wrapped}^{exp}"));
            } else {
                parts.push(wrapped);
            }
        }
        out.push_str(&parts.join(" · "));
    }
    out
}
