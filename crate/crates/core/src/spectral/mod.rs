//! Spectral tools: forward/inverse transforms, dominant-frequency filtering,
//! periodogram PSD and zero-lag cross-correlation.

mod fft;

pub use fft::{FftPlan, MAX_DIRECT_RADIX};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Candidate `k` values of the default filter sweep.
pub const DEFAULT_K_CANDIDATES: [usize; 5] = [0, 5, 10, 20, 30];

/// Two-sided DFT of a real window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Signed bin frequencies in Hz; bins above `len/2` are negative.
    pub bin_frequencies: Vec<T>,
    pub coefficients: Vec<Complex<T>>,
    pub sample_rate_hz: T,
}

impl<T: Scalar> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Sum of squared coefficient magnitudes.
    pub fn energy(&self) -> T {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate<T> {
    pub frequencies: Vec<T>,
    pub power_density: Vec<T>,
}

impl<T: Scalar> PsdEstimate<T> {
    /// Frequency and density of the strongest non-DC bin.
    pub fn peak(&self) -> Option<(T, T)> {
        self.frequencies
            .iter()
            .zip(&self.power_density)
            .skip(1)
            .fold(None, |best: Option<(T, T)>, (&f, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((f, p)),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,power_per_hz\n");
        for (f, p) in self.frequencies.iter().zip(&self.power_density) {
            out.push_str(&format!("{f},{p}\n"));
        }
        out
    }
}

fn check_signal<T: Scalar>(values: &[T]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "transform needs at least 2 samples, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("signal contains non-finite values".into()));
    }
    Ok(())
}

fn bin_frequency<T: Scalar>(k: usize, n: usize, sample_rate_hz: T) -> T {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    T::of(signed) * sample_rate_hz / T::of_usize(n)
}

/// Unnormalized forward DFT; [`inverse_transform`] applies `1/N`.
pub fn forward_transform<T: Scalar>(values: &[T], sample_rate_hz: T) -> Result<Spectrum<T>> {
    check_signal(values)?;
    forward_with(&FftPlan::new(values.len()), values, sample_rate_hz)
}

fn forward_with<T: Scalar>(plan: &FftPlan<T>, values: &[T], sample_rate_hz: T) -> Result<Spectrum<T>> {
    let n = values.len();
    let mut coefficients: Vec<Complex<T>> =
        values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    plan.process(&mut coefficients);
    Ok(Spectrum {
        bin_frequencies: (0..n).map(|k| bin_frequency(k, n, sample_rate_hz)).collect(),
        coefficients,
        sample_rate_hz,
    })
}

pub fn inverse_transform<T: Scalar>(spectrum: &Spectrum<T>) -> Vec<Complex<T>> {
    let mut data = spectrum.coefficients.clone();
    FftPlan::new(data.len()).process_inverse(&mut data);
    data
}

/// Keeps the DC term plus the `k` strongest frequencies of a real window.
///
/// Each conjugate pair `(b, n-b)` counts as one frequency, so `n/2` is the
/// number of candidates and any `k` at or above it reproduces the input.
/// `k = 0` disables filtering and returns the input untouched.
#[derive(Debug, Clone)]
pub struct TopKFilter<T> {
    k: usize,
    plan: FftPlan<T>,
}

impl<T: Scalar> TopKFilter<T> {
    pub fn new(len: usize, k: usize) -> Result<Self> {
        if k > len {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds window length {len}")));
        }
        if k > 0 && len < 2 {
            return Err(Error::InvalidArgument("filtering needs at least 2 samples".into()));
        }
        Ok(TopKFilter { k, plan: FftPlan::new(len) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn apply(&self, values: &[T]) -> Result<Vec<T>> {
        let n = self.plan.len();
        if values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "filter planned for {n} samples, got {}",
                values.len()
            )));
        }
        if self.k == 0 {
            return Ok(values.to_vec());
        }
        check_signal(values)?;
        let mut coeffs: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.plan.process(&mut coeffs);

        let mut candidates: Vec<usize> = (1..=n / 2).collect();
        // Stable sort: equal magnitudes keep the lower bin first.
        candidates.sort_by(|&a, &b| coeffs[b].norm_sqr().partial_cmp(&coeffs[a].norm_sqr()).unwrap());
        let mut keep = vec![false; n];
        keep[0] = true;
        for &b in candidates.iter().take(self.k) {
            keep[b] = true;
            keep[n - b] = true;
        }
        for (c, &kept) in coeffs.iter_mut().zip(&keep) {
            if !kept {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
        self.plan.process_inverse(&mut coeffs);
        Ok(coeffs.into_iter().map(|c| c.re).collect())
    }
}

pub fn topk_filter<T: Scalar>(values: &[T], k: usize) -> Result<Vec<T>> {
    TopKFilter::new(values.len(), k)?.apply(values)
}

/// Result of a filter-strength sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    /// `(k, accuracy)` in ascending `k`.
    pub rows: Vec<(usize, f64)>,
    pub best_k: usize,
}

impl KSelection {
    pub fn to_csv(&self) -> String {
        let ks: Vec<String> = self.rows.iter().map(|(k, _)| k.to_string()).collect();
        let accs: Vec<String> = self.rows.iter().map(|(_, a)| format!("{a:.4}")).collect();
        format!("k,{}\naccuracy,{}\n", ks.join(","), accs.join(","))
    }
}

/// Scores every candidate `k` with `evaluator` and returns the most accurate;
/// ties go to the smallest `k`.
pub fn select_k<F>(candidates: &[usize], mut evaluator: F) -> Result<KSelection>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::InvalidArgument("empty k candidate set".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        rows.push((k, evaluator(k)?));
    }
    let best_k = rows
        .iter()
        .fold(None, |best: Option<(usize, f64)>, &(k, a)| match best {
            Some((_, ba)) if ba >= a => best,
            _ => Some((k, a)),
        })
        .map(|(k, _)| k)
        .expect("non-empty rows");
    Ok(KSelection { rows, best_k })
}

/// Single-window rectangular periodogram, one-sided.
///
/// `density[f] = |X[f]|^2 / (N * fs)`, doubled for bins strictly between DC
/// and Nyquist, so that `sum(density) * fs / N` equals the mean power.
pub fn psd<T: Scalar>(values: &[T], sample_rate_hz: T) -> Result<PsdEstimate<T>> {
    if !(sample_rate_hz > T::zero()) {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    let spectrum = forward_transform(values, sample_rate_hz)?;
    let n = values.len();
    let half = n / 2;
    let norm = T::of_usize(n) * sample_rate_hz;
    let two = T::of(2.0);
    let mut frequencies = Vec::with_capacity(half + 1);
    let mut power_density = Vec::with_capacity(half + 1);
    for k in 0..=half {
        frequencies.push(T::of_usize(k) * sample_rate_hz / T::of_usize(n));
        let p = spectrum.coefficients[k].norm_sqr() / norm;
        let mirrored = k != 0 && !(n.is_multiple_of(2) && k == half);
        power_density.push(if mirrored { p * two } else { p });
    }
    Ok(PsdEstimate { frequencies, power_density })
}

/// Pearson-normalized cross-correlation at lag zero, in `[-1, 1]`.
pub fn xcorr0<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    if a.iter().all(|&v| v == a[0]) {
        return Err(Error::UndefinedCorrelation("a"));
    }
    if b.iter().all(|&v| v == b[0]) {
        return Err(Error::UndefinedCorrelation("b"));
    }
    let n = T::of_usize(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Upper-triangular correlation table over named series (diagonal 1, lower
/// triangle `None`). Series are truncated to the shortest length.
pub fn correlation_table<T: Scalar>(series: &[(String, Vec<T>)]) -> Result<Vec<Vec<Option<T>>>> {
    let len = series.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    let mut table = vec![vec![None; series.len()]; series.len()];
    for i in 0..series.len() {
        table[i][i] = Some(T::one());
        for j in i + 1..series.len() {
            table[i][j] = Some(xcorr0(&series[i].1[..len], &series[j].1[..len])?);
        }
    }
    Ok(table)
}

/// Renders [`correlation_table`] output as CSV, `-` below the diagonal.
pub fn correlation_csv<T: Scalar>(names: &[String], table: &[Vec<Option<T>>]) -> String {
    let mut out = format!(",{}\n", names.join(","));
    for (name, row) in names.iter().zip(table) {
        out.push_str(name);
        for cell in row {
            match cell {
                Some(v) => out.push_str(&format!(",{:.4}", v.as_f64())),
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
    }
    out
}
