//! Small statistical utilities shared by tests and experiments.
//!
//! Monte Carlo experiments in this crate report a mean and its standard
//! error and compare against claimed values in units of standard errors, so
//! these helpers are part of the library rather than test-only code.

/// Sample mean and standard error of the mean.
///
/// Returns `(0, 0)` for an empty slice. The standard error uses the unbiased
/// sample variance; a single observation has standard error 0.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Standard error of an empirical frequency under its *claimed* probability:
/// `sqrt(p(1-p)/n)`. Preferred when testing a hypothesized rate `p`, where
/// the sample-based estimate degenerates for extreme counts.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Natural log of `n!` via a cumulative table. Exact summation of `ln k`,
/// accurate to double precision for the desk-scale `n` used here.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Exact upper tail `P[Bin(n, p) ≥ k]`, evaluated in log space so that
/// extreme tails neither underflow nor overflow.
pub fn binomial_tail_geq(n: u64, k: u64, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let lf = ln_factorials(n);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let ln_terms: Vec<f64> = (k..=n)
        .map(|j| {
            lf[n as usize] - lf[j as usize] - lf[(n - j) as usize]
                + j as f64 * lp
                + (n - j) as f64 * lq
        })
        .collect();
    let m = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = ln_terms.iter().map(|&t| (t - m).exp()).sum();
    (m + sum.ln()).exp().min(1.0)
}

/// One-sample Kolmogorov–Smirnov statistic `D_n = sup |F_n(x) − F(x)|`
/// against a continuous CDF. `samples` need not be sorted.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Critical value for the one-sample KS test at significance `alpha`
/// (asymptotic): `sqrt(ln(2/alpha)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Pearson correlation coefficient of two equal-length samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, _) = mean_and_se(xs);
    let (my, _) = mean_and_se(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// In-place Walsh–Hadamard transform (unnormalized):
/// `out[o] = Σ_s (−1)^{popcount(s & o)} v[s]`. Length must be a power of two.
pub fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(h * 2) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}
