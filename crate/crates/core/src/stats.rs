//! Small statistics helpers shared by the Monte Carlo estimators.

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanVar {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Combines two accumulators (Chan et al. parallel update).
    pub fn merge(&mut self, other: &MeanVar) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanVar::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Pointwise mean and variance of a family of equally sampled curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveStats {
    points: Vec<MeanVar>,
}

impl CurveStats {
    pub fn new(len: usize) -> Self {
        Self {
            points: vec![MeanVar::new(); len],
        }
    }

    pub fn push(&mut self, curve: &[f64]) {
        for (acc, v) in self.points.iter_mut().zip(curve) {
            acc.push(*v);
        }
    }

    pub fn merge(&mut self, other: &CurveStats) {
        for (a, b) in self.points.iter_mut().zip(&other.points) {
            a.merge(b);
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(MeanVar::mean).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.points.iter().map(MeanVar::std_error).collect()
    }

    pub fn point(&self, i: usize) -> &MeanVar {
        &self.points[i]
    }
}

/// Runs `work` over fixed-size chunks of `0..n` in parallel and returns the
/// per-chunk results in chunk order. Because the chunking does not depend
/// on the thread count, sequentially merging the results is deterministic.
pub fn chunked<T: Send>(
    n: usize,
    chunk: usize,
    work: impl Fn(std::ops::Range<usize>) -> T + Sync,
) -> Vec<T> {
    use rayon::prelude::*;
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| work(c * chunk..((c + 1) * chunk).min(n)))
        .collect()
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
/// Returns `None` for fewer than two points or degenerate abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Time grid with `linear` uniform points on `[0, t_split]` followed by
/// `log` geometric points up to `horizon`.
pub fn mixed_time_grid(horizon: f64, linear: usize, log: usize) -> Vec<f64> {
    if horizon <= 0.0 {
        return vec![0.0];
    }
    let t_split = (horizon / 100.0).max(horizon.min(1.0));
    let t_split = t_split.min(horizon);
    let mut grid: Vec<f64> = (0..=linear.max(1))
        .map(|k| t_split * k as f64 / linear.max(1) as f64)
        .collect();
    if t_split < horizon && log > 0 {
        let ratio = (horizon / t_split).powf(1.0 / log as f64);
        let mut t = t_split;
        for k in 1..=log {
            t = if k == log { horizon } else { t * ratio };
            grid.push(t);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..37).map(|i| ((i * 7) % 11) as f64 * 0.3).collect();
        let whole: MeanVar = xs.iter().copied().collect();
        let mut left: MeanVar = xs[..10].iter().copied().collect();
        let right: MeanVar = xs[10..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        assert!((left.mean() - whole.mean()).abs() < 1e-14);
        assert!((left.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn chunked_preserves_order() {
        let parts = chunked(10, 3, |r| r.collect::<Vec<_>>());
        assert_eq!(
            parts,
            vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9]]
        );
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let acc: MeanVar = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((acc.mean() - mean).abs() < 1e-14);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -1.5 * v + 2.0).collect();
        let (s, c) = linear_fit(&x, &y).unwrap();
        assert!((s + 1.5).abs() < 1e-12 && (c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_increasing_and_ends_at_horizon() {
        let g = mixed_time_grid(50.0, 20, 40);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 50.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
