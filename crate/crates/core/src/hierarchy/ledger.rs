//! Bounds on the sup-norms `K_n` of the stationary correlation functions.
//!
//! With `H` the transience constant, `K_n ≤ n² K_{n-1} H + ρ^n` and, by
//! induction from `K_0 = 0`, `K_n ≤ D H^n (n!)²` where
//! `D = Σ_{n≥1} (ρ/H)^n / (n!)²`. The ledger checks the computed `K_1`,
//! `K_2` against the first recurrence step and evaluates the chain
//! symbolically up to `n_max`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedgerOptions {
    /// Multiplier applied to the estimated transience constant.
    pub safety: f64,
    pub n_max: usize,
    /// Series terms below this fraction of the running sum end the sum.
    pub cutoff: f64,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        Self {
            safety: 2.0,
            n_max: 8,
            cutoff: 1e-15,
        }
    }
}

/// One step of the symbolic chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub n: usize,
    /// `K_n = n² K_{n-1} H + ρ^n`.
    pub k_n: f64,
    /// `D H^n (n!)²`.
    pub bound: f64,
    /// `L_n = K_n / (H^n (n!)²)`.
    pub l_n: f64,
    /// `Σ_{m ≤ n} (ρ/H)^m / (m!)²`.
    pub partial_sum: f64,
    pub relative_error: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundLedger {
    pub rho: f64,
    /// Transience constant as estimated.
    pub h_estimate: f64,
    pub safety: f64,
    /// `Ĥ = safety · h_estimate`, used in every bound below.
    pub h_hat: f64,
    pub k1: f64,
    pub k2: f64,
    /// `4 K_1 Ĥ + ρ²`.
    pub k2_bound: f64,
    pub k2_ok: bool,
    pub d: f64,
    pub d_terms: usize,
    pub chain: Vec<ChainRow>,
    pub chain_ok: bool,
}

impl BoundLedger {
    pub fn new(rho: f64, k1: f64, k2: f64, h_estimate: f64, opts: &LedgerOptions) -> Self {
        let h_hat = opts.safety * h_estimate;
        let k2_bound = 4.0 * k1 * h_hat + rho * rho;
        let (d, d_terms) = series_d(rho, h_hat, opts.cutoff);
        let chain = bound_chain(rho, h_hat, opts.n_max, d);
        let chain_ok = !chain.is_empty() && chain.iter().all(|r| r.ok);
        Self {
            rho,
            h_estimate,
            safety: opts.safety,
            h_hat,
            k1,
            k2,
            k2_bound,
            k2_ok: k2 <= k2_bound,
            d,
            d_terms,
            chain,
            chain_ok,
        }
    }

    /// Every recorded inequality holds.
    pub fn ok(&self) -> bool {
        self.k2_ok && self.chain_ok && self.k1 <= self.rho * (1.0 + 1e-12)
    }
}

/// `D = Σ_{n≥1} (ρ/H)^n / (n!)²`, summed until a term drops below
/// `cutoff` times the running sum. Returns the sum and the number of terms.
pub fn series_d(rho: f64, h: f64, cutoff: f64) -> (f64, usize) {
    if !(h > 0.0) {
        return (f64::INFINITY, 0);
    }
    let q = rho / h;
    let (mut term, mut sum, mut n) = (q, q, 1usize);
    while term > cutoff * sum && n < 10_000 {
        n += 1;
        term *= q / (n * n) as f64;
        sum += term;
    }
    (sum, n)
}

/// Symbolic chain `K_n = n² K_{n-1} H + ρ^n`, `K_0 = 0`, for `n ≤ n_max`,
/// checked against `D H^n (n!)²` and against the partial sums of `D`.
pub fn bound_chain(rho: f64, h: f64, n_max: usize, d: f64) -> Vec<ChainRow> {
    let mut rows = Vec::with_capacity(n_max);
    let (mut k, mut scale, mut partial, mut term) = (0.0, 1.0, 0.0, 1.0);
    for n in 1..=n_max {
        let nf = n as f64;
        k = nf * nf * k * h + rho.powi(n as i32);
        scale *= h * nf * nf;
        term *= rho / h / (nf * nf);
        partial += term;
        let bound = d * scale;
        let l_n = k / scale;
        let relative_error = ((l_n - partial) / partial).abs();
        rows.push(ChainRow {
            n,
            k_n: k,
            bound,
            l_n,
            partial_sum: partial,
            relative_error,
            ok: k <= bound * (1.0 + 1e-12) && relative_error <= 1e-12,
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_matches_bessel_series() {
        // Σ_{n≥0} x^n/(n!)² = I_0(2√x); at x = 1 this is 2.2795853023360673
        let (d, terms) = series_d(1.0, 1.0, 1e-15);
        assert!((d + 1.0 - 2.279_585_302_336_067_3).abs() < 1e-15, "{d}");
        assert!(terms < 20);
    }

    #[test]
    fn chain_reproduces_partial_sums() {
        for (rho, h) in [(1.0, 1.0), (0.3, 2.5), (5.0, 0.7)] {
            let (d, _) = series_d(rho, h, 1e-15);
            let rows = bound_chain(rho, h, 8, d);
            assert_eq!(rows.len(), 8);
            assert!(rows.iter().all(|r| r.ok), "{rows:?}");
            assert_eq!(rows[0].k_n, rho);
            assert!((rows[1].k_n - (4.0 * rho * h + rho * rho)).abs() < 1e-12);
        }
    }

    #[test]
    fn ledger_flags_violation() {
        let l = BoundLedger::new(1.0, 1.0, 100.0, 1.0, &LedgerOptions::default());
        assert_eq!(l.k2_bound, 9.0);
        assert!(!l.k2_ok);
        assert!(!l.ok());
    }
}
