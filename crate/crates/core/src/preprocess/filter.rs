//! Butterworth band-pass design as cascaded biquads, applied forward and
//! backward for zero phase.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Epoch;
use crate::error::{Error, Result};
use crate::scalar::Real;

type C64 = (f64, f64);

fn c_add(a: C64, b: C64) -> C64 {
    (a.0 + b.0, a.1 + b.1)
}
fn c_sub(a: C64, b: C64) -> C64 {
    (a.0 - b.0, a.1 - b.1)
}
fn c_mul(a: C64, b: C64) -> C64 {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}
fn c_div(a: C64, b: C64) -> C64 {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}
fn c_sqrt(a: C64) -> C64 {
    let r = (a.0 * a.0 + a.1 * a.1).sqrt();
    let re = ((r + a.0) / 2.0).max(0.0).sqrt();
    let im = ((r - a.0) / 2.0).max(0.0).sqrt();
    (re, if a.1 < 0.0 { -im } else { im })
}

/// One second-order section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct form II state for steady state under constant input `u`.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let z2 = self.b[2] * u - self.a[2] * y;
        let z1 = self.b[1] * u - self.a[1] * y + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Single causal pass; `initial` scales each section's steady state.
    fn run(&self, x: &mut [f64], initial: f64) {
        let mut u = initial;
        for s in &self.sections {
            let [mut z1, mut z2] = s.steady_state(u);
            u *= s.dc_gain();
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * y + z2;
                z2 = s.b[2] * input - s.a[2] * y;
                *v = y;
            }
        }
    }
}

/// Complex gain `H(e^{j 2 pi f / fs})` of a cascade, as (re, im).
pub fn frequency_response(filter: &SosFilter, freq_hz: f64, sampling_rate: f64) -> (f64, f64) {
    let w = 2.0 * PI * freq_hz / sampling_rate;
    let z1 = (w.cos(), -w.sin());
    let z2 = c_mul(z1, z1);
    filter.sections.iter().fold((1.0, 0.0), |acc, s| {
        let num = c_add(c_add((s.b[0], 0.0), c_mul((s.b[1], 0.0), z1)), c_mul((s.b[2], 0.0), z2));
        let den = c_add(c_add((s.a[0], 0.0), c_mul((s.a[1], 0.0), z1)), c_mul((s.a[2], 0.0), z2));
        c_mul(acc, c_div(num, den))
    })
}

/// Butterworth band-pass of prototype order `order` (so `2 * order` poles,
/// `order` sections), designed by prewarped bilinear transform.
pub fn design_bandpass(low_hz: f64, high_hz: f64, sampling_rate: f64, order: usize) -> Result<SosFilter> {
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < sampling_rate / 2.0) {
        return Err(Error::InvalidBand {
            low_hz,
            high_hz,
            sampling_rate,
        });
    }
    if order == 0 {
        return Err(Error::InvalidConfig("filter order must be >= 1".into()));
    }
    let fs2 = 2.0 * sampling_rate;
    let w_lo = fs2 * (PI * low_hz / sampling_rate).tan();
    let w_hi = fs2 * (PI * high_hz / sampling_rate).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    // Analog band-pass poles from the low-pass prototype.
    let mut analog = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = (theta.cos() * bw / 2.0, theta.sin() * bw / 2.0);
        let root = c_sqrt(c_sub(c_mul(p, p), (w0_sq, 0.0)));
        analog.push(c_add(p, root));
        analog.push(c_sub(p, root));
    }
    // Bilinear transform; zeros: `order` at z = 1 (from s = 0) and `order` at z = -1.
    let digital: Vec<C64> = analog
        .iter()
        .map(|&p| c_div(c_add((fs2, 0.0), p), c_sub((fs2, 0.0), p)))
        .collect();
    let mut upper: Vec<C64> = digital.iter().copied().filter(|p| p.1 > 1e-14).collect();
    let mut real: Vec<f64> = digital.iter().filter(|p| p.1.abs() <= 1e-14).map(|p| p.0).collect();
    upper.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sections = Vec::with_capacity(order);
    for p in upper {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -2.0 * p.0, p.0 * p.0 + p.1 * p.1],
        });
    }
    for pair in real.chunks(2) {
        let (p1, p2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(p1 + p2), p1 * p2],
        });
    }
    if sections.len() != order {
        return Err(Error::InvalidConfig(format!(
            "band {low_hz}-{high_hz} Hz produced an unpaired pole set"
        )));
    }
    // Unit gain where the analog prototype peaks.
    let center = sampling_rate / PI * (w0_sq.sqrt() / fs2).atan();
    let mut filter = SosFilter { sections };
    let h = frequency_response(&filter, center, sampling_rate);
    let norm = 1.0 / (h.0 * h.0 + h.1 * h.1).sqrt();
    for v in filter.sections[0].b.iter_mut() {
        *v *= norm;
    }
    Ok(filter)
}

/// Zero-phase filtering: odd-reflection padding of `pad` samples per side,
/// steady-state initial conditions, forward pass, backward pass, trim.
pub fn filtfilt(filter: &SosFilter, x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let first = ext[0];
    filter.run(&mut ext, first);
    ext.reverse();
    let first = ext[0];
    filter.run(&mut ext, first);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterBankSpec {
    pub bands: Vec<(f64, f64)>,
    pub filter_order: usize,
}

impl Default for FilterBankSpec {
    fn default() -> Self {
        FilterBankSpec {
            bands: vec![(6.0, 12.0), (12.0, 18.0), (18.0, 24.0), (24.0, 30.0), (30.0, 36.0)],
            filter_order: 4,
        }
    }
}

impl FilterBankSpec {
    pub fn validate(&self, sampling_rate: f64) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidConfig("filter bank has no bands".into()));
        }
        for &(lo, hi) in &self.bands {
            if !(lo > 0.0 && lo < hi && hi < sampling_rate / 2.0) {
                return Err(Error::InvalidBand {
                    low_hz: lo,
                    high_hz: hi,
                    sampling_rate,
                });
            }
        }
        Ok(())
    }

    pub fn design(&self, sampling_rate: f64) -> Result<Vec<SosFilter>> {
        self.validate(sampling_rate)?;
        self.bands
            .iter()
            .map(|&(lo, hi)| design_bandpass(lo, hi, sampling_rate, self.filter_order))
            .collect()
    }

    fn pad(&self) -> usize {
        3 * self.filter_order
    }
}

/// Output channel `b * E + e` is input channel `e` filtered by band `b`.
pub fn apply_filter_bank<T: Real>(epoch: &Epoch<T>, spec: &FilterBankSpec) -> Result<Epoch<T>> {
    let filters = spec.design(epoch.sampling_rate)?;
    Ok(filter_with(epoch, &filters, spec.pad()))
}

pub(crate) fn filter_with<T: Real>(epoch: &Epoch<T>, filters: &[SosFilter], pad: usize) -> Epoch<T> {
    let (e, n) = epoch.data.dim();
    let mut out = Array2::<T>::zeros((e * filters.len(), n));
    for (b, f) in filters.iter().enumerate() {
        for (c, row) in epoch.data.rows().into_iter().enumerate() {
            let x: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            let y = filtfilt(f, &x, pad);
            for (dst, v) in out.row_mut(b * e + c).iter_mut().zip(y) {
                *dst = T::cast(v);
            }
        }
    }
    epoch.with_data(out)
}

pub(crate) fn bank_pad(spec: &FilterBankSpec) -> usize {
    spec.pad()
}
