use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Summary { mean, std_error: 0.0, n };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Summary { mean, std_error: (var / n as f64).sqrt(), n }
    }

    /// Summary of the pairwise difference `a_i - b_i`.
    pub fn of_difference(a: &[f64], b: &[f64]) -> Summary {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Summary::of(&d)
    }
}

/// Standard error of the difference of two independent estimates.
pub fn combined_std_error(a: &Summary, b: &Summary) -> f64 {
    (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
}

/// One-sample Kolmogorov-Smirnov statistic `D = sup |F_n - F|`; sorts `xs` in place.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Kolmogorov survival function `P(K > x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of `D` for sample size `n`, with Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf(d * (sn + 0.12 + 0.11 / sn))
}
