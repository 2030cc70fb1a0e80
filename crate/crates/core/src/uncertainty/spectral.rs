//! Continuous Fourier transform `h^(xi) = int e^{-2 pi i x xi} h(x) dx` on a
//! uniform grid, and grid Shannon entropies.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{lsi_to_bhi_transform, Profile};
use crate::density::PiecewiseLogDensity;
use crate::error::{invalid, Error, Result};
use crate::functionals::lsi_deficit;
use crate::gaussian::LN_2;
use crate::serde_ext::fmt17;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Starting number of samples, a power of two.
    pub n: usize,
    /// Refinement stops here even if the entropy estimates have not settled.
    pub max_n: usize,
    /// `int h^2` allowed outside the sampled window.
    pub truncation_tol: f64,
    /// Window half-width as a multiple of the certified support.
    pub pad: f64,
    /// Target for the Richardson estimates of both entropies.
    pub entropy_tol: f64,
    /// Overrides the certified support half-width.
    pub half_width: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 1 << 16, max_n: 1 << 18, truncation_tol: 1e-12, pad: 4.0, entropy_tol: 1e-6, half_width: None }
    }
}

impl GridSpec {
    pub fn with_n(n: usize) -> Self {
        GridSpec { n, max_n: n, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for n in [self.n, self.max_n] {
            if !n.is_power_of_two() || !(1 << 8..=1 << 22).contains(&n) {
                return Err(Error::BadGridSize(n));
            }
        }
        if !(self.pad >= 1.0 && self.pad.is_finite()) {
            return Err(invalid("pad", format!("must be finite and >= 1, got {}", self.pad)));
        }
        if !(self.truncation_tol > 0.0 && self.entropy_tol > 0.0) {
            return Err(invalid("tolerance", "must be > 0"));
        }
        Ok(())
    }
}

/// Samples of `h` on `x_j = (j - N/2) dx` and of `h^` on `xi_m = (m - N/2) dxi`, `dxi = 1/(N dx)`.
#[derive(Clone, Debug)]
pub struct SpectralProfile {
    pub dx: f64,
    pub dxi: f64,
    /// Certified support half-width of `h`.
    pub support: f64,
    pub h: Vec<f64>,
    pub h_hat: Vec<Complex64>,
    /// `|‖h^‖_2 - ‖h‖_2|` on the grid.
    pub plancherel_error: f64,
    /// Whether both entropy estimates met the target before `max_n`.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeta {
    pub n: usize,
    pub dx: f64,
    pub dxi: f64,
    pub half_width: f64,
    pub support: f64,
    pub plancherel_error: f64,
    pub converged: bool,
}

/// `-sum rho ln rho * spacing` and the change against every other sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    pub value: f64,
    pub richardson: f64,
}

fn xlogx(r: f64) -> f64 {
    if r > 0.0 {
        r * r.ln()
    } else {
        0.0
    }
}

pub fn shannon_entropy(samples: &[f64], spacing: f64) -> Result<Entropy> {
    if !(spacing > 0.0) {
        return Err(invalid("spacing", "must be > 0"));
    }
    if let Some(bad) = samples.iter().find(|r| **r < -1e-12 || r.is_nan()) {
        return Err(invalid("samples", format!("density sample {bad} is negative")));
    }
    let full: f64 = -samples.iter().map(|r| xlogx(*r)).sum::<f64>() * spacing;
    let half: f64 = -samples.iter().step_by(2).map(|r| xlogx(*r)).sum::<f64>() * 2.0 * spacing;
    Ok(Entropy { value: full, richardson: (full - half).abs() })
}

impl SpectralProfile {
    /// Transform raw samples `h_j` taken at `x_j = (j - N/2) dx`; no normalization is applied.
    pub fn from_samples(h: Vec<f64>, dx: f64) -> Result<Self> {
        let n = h.len();
        if !n.is_power_of_two() || n < 8 {
            return Err(Error::BadGridSize(n));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(invalid("dx", "must be finite and > 0"));
        }
        // with N divisible by 4 the offset phase reduces to (-1)^j (-1)^m
        let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut buf: Vec<Complex64> = h.iter().enumerate().map(|(j, v)| Complex64::new(v * sign(j), 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        for (m, c) in buf.iter_mut().enumerate() {
            *c *= dx * sign(m);
        }
        let dxi = 1.0 / (n as f64 * dx);
        let nx = (h.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
        let nxi = (buf.iter().map(|c| c.norm_sqr()).sum::<f64>() * dxi).sqrt();
        Ok(SpectralProfile { dx, dxi, support: 0.5 * n as f64 * dx, h, h_hat: buf, plancherel_error: (nx - nxi).abs(), converged: true })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - 0.5 * self.n() as f64) * self.dx
    }

    pub fn xi(&self, m: usize) -> f64 {
        (m as f64 - 0.5 * self.n() as f64) * self.dxi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.n() as f64 * self.dx
    }

    pub fn entropy_x(&self) -> Result<Entropy> {
        let rho: Vec<f64> = self.h.iter().map(|v| v * v).collect();
        shannon_entropy(&rho, self.dx)
    }

    pub fn entropy_xi(&self) -> Result<Entropy> {
        let rho: Vec<f64> = self.h_hat.iter().map(|c| c.norm_sqr()).collect();
        shannon_entropy(&rho, self.dxi)
    }

    /// `S(|h|^2) + S(|h^|^2) - (1 - ln 2)`.
    pub fn delta_bh(&self) -> Result<f64> {
        Ok(self.entropy_x()?.value + self.entropy_xi()?.value - (1.0 - LN_2))
    }

    /// `int |h^|^2 (ln|h^|^2 - ln g^2) dxi`, the Fourier-Wiener entropy of `h^/g` against `g^2 dxi`.
    pub fn wiener_entropy(&self) -> f64 {
        let pi = std::f64::consts::PI;
        self.h_hat
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let r = c.norm_sqr();
                if r > 0.0 {
                    let xi = self.xi(m);
                    r * (r.ln() - (0.5 * LN_2 - 2.0 * pi * xi * xi))
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            * self.dxi
    }

    pub fn meta(&self) -> SpectralMeta {
        SpectralMeta {
            n: self.n(),
            dx: self.dx,
            dxi: self.dxi,
            half_width: self.half_width(),
            support: self.support,
            plancherel_error: self.plancherel_error,
            converged: self.converged,
        }
    }

    /// Rows `x,h,xi,re_hhat,im_hhat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,h,xi,re_hhat,im_hhat\n");
        for j in 0..self.n() {
            let c = self.h_hat[j];
            out.push_str(&[fmt17(self.x(j)), fmt17(self.h[j]), fmt17(self.xi(j)), fmt17(c.re), fmt17(c.im)].join(","));
            out.push('\n');
        }
        out
    }
}

fn sample(h: &dyn Profile, n: usize, half_width: f64) -> Vec<f64> {
    let dx = 2.0 * half_width / n as f64;
    (0..n).map(|j| h.ln_value((j as f64 - 0.5 * n as f64) * dx).exp()).collect()
}

/// Transform a unit-norm profile, doubling `N` until both entropies settle.
pub fn fourier_transform(h: &dyn Profile, spec: &GridSpec) -> Result<SpectralProfile> {
    spec.validate()?;
    let support = match spec.half_width {
        Some(x) if x > 0.0 && x.is_finite() => x,
        Some(x) => return Err(invalid("half_width", format!("must be finite and > 0, got {x}"))),
        None => h.support_half_width(spec.truncation_tol)?,
    };
    let half_width = spec.pad * support;
    let mut n = spec.n;
    loop {
        let mut v = sample(h, n, half_width);
        let dx = 2.0 * half_width / n as f64;
        let norm2: f64 = v.iter().map(|x| x * x).sum::<f64>() * dx;
        if (norm2 - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized(norm2));
        }
        let s = norm2.sqrt();
        v.iter_mut().for_each(|x| *x /= s);
        let mut prof = SpectralProfile::from_samples(v, dx)?;
        prof.support = support;
        let rich = prof.entropy_x()?.richardson.max(prof.entropy_xi()?.richardson);
        if rich <= spec.entropy_tol || n >= spec.max_n {
            prof.converged = rich <= spec.entropy_tol;
            return Ok(prof);
        }
        n *= 2;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhiReport {
    pub entropy_x: Entropy,
    pub entropy_xi: Entropy,
    pub delta_bh: f64,
    pub grid: SpectralMeta,
}

pub fn bhi_deficit(h: &dyn Profile, spec: &GridSpec) -> Result<BhiReport> {
    let prof = fourier_transform(h, spec)?;
    let (ex, exi) = (prof.entropy_x()?, prof.entropy_xi()?);
    Ok(BhiReport { entropy_x: ex, entropy_xi: exi, delta_bh: ex.value + exi.value - (1.0 - LN_2), grid: prof.meta() })
}

/// `delta(f) - R(f) = delta_BH(h_f)` with `R = int |Wf|^2 ln|Wf|^2 dm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlenReport {
    pub label: String,
    pub delta: f64,
    pub remainder: f64,
    pub delta_bh: f64,
    /// `delta - remainder - delta_bh`.
    pub residual: f64,
    pub grid: SpectralMeta,
}

impl CarlenReport {
    pub const CSV_HEADER: &'static str = "measure,delta,remainder,delta_bh,residual,n";

    pub fn csv_row(&self) -> String {
        [
            self.label.replace(',', ";"),
            fmt17(self.delta),
            fmt17(self.remainder),
            fmt17(self.delta_bh),
            fmt17(self.residual),
            self.grid.n.to_string(),
        ]
        .join(",")
    }
}

pub fn fourier_wiener_remainder(f: &PiecewiseLogDensity, spec: &GridSpec) -> Result<CarlenReport> {
    let prof = fourier_transform(&lsi_to_bhi_transform(f), spec)?;
    let delta = lsi_deficit(f)?;
    let remainder = prof.wiener_entropy();
    let delta_bh = prof.delta_bh()?;
    Ok(CarlenReport {
        label: f.label().to_string(),
        delta,
        remainder,
        delta_bh,
        residual: delta - remainder - delta_bh,
        grid: prof.meta(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{make_bump_family, make_shifted_gaussian};
    use crate::uncertainty::OptimizerParams;
    use std::f64::consts::PI;

    fn small() -> GridSpec {
        GridSpec { n: 1 << 12, max_n: 1 << 14, ..Default::default() }
    }

    #[test]
    fn g_is_self_dual() {
        let prof = fourier_transform(&OptimizerParams::standard(), &small()).unwrap();
        for m in (0..prof.n()).step_by(97) {
            let xi = prof.xi(m);
            let want = (0.25 * LN_2 - PI * xi * xi).exp();
            assert!((prof.h_hat[m] - Complex64::new(want, 0.0)).norm() < 1e-8, "xi={xi}");
        }
        assert!(prof.plancherel_error < 1e-12);
    }

    #[test]
    fn gaussian_transform_rescales_width() {
        // G_a^ = (2 pi / a)^{1/4} ... = G_{pi^2/a} with the same L2 norm
        let a = 2.0 * PI;
        let prof = fourier_transform(&OptimizerParams::new(a, 0.0).unwrap(), &small()).unwrap();
        let dual = OptimizerParams::new(PI * PI / a, 0.0).unwrap();
        for m in (0..prof.n()).step_by(61) {
            let want = dual.ln_value(prof.xi(m)).exp();
            assert!((prof.h_hat[m].re - want).abs() < 1e-8 && prof.h_hat[m].im.abs() < 1e-8);
        }
    }

    #[test]
    fn transform_is_linear() {
        let n = 1 << 10;
        let dx = 16.0 / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| (j as f64 - 0.5 * n as f64) * dx).collect();
        let a: Vec<f64> = xs.iter().map(|x| (-PI * x * x).exp()).collect();
        let b: Vec<f64> = xs.iter().map(|x| (-3.0 * (x - 1.0).powi(2)).exp()).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 2.0 * u - v).collect();
        let (fa, fb, fab) = (
            SpectralProfile::from_samples(a, dx).unwrap(),
            SpectralProfile::from_samples(b, dx).unwrap(),
            SpectralProfile::from_samples(ab, dx).unwrap(),
        );
        for m in 0..n {
            assert!((fab.h_hat[m] - (fa.h_hat[m] * 2.0 - fb.h_hat[m])).norm() < 1e-12);
        }
        assert!(SpectralProfile::from_samples(vec![0.0; 100], 0.1).is_err());
    }

    #[test]
    fn uniform_entropy_is_zero() {
        let n = 1000;
        let rho = vec![1.0; n];
        let e = shannon_entropy(&rho, 1.0 / n as f64).unwrap();
        assert!(e.value.abs() < 1e-15);
        assert!(shannon_entropy(&[0.5, -0.1], 1.0).is_err());
    }

    #[test]
    fn gaussian_entropy_sum_is_extremal() {
        // S(|G_a|^2) = 1/2 + 1/2 ln(pi / (2a)) and the dual has a -> pi^2 / a
        for &a in &[PI / 2.0, 2.0 * PI] {
            let r = bhi_deficit(&OptimizerParams::new(a, 0.0).unwrap(), &small()).unwrap();
            let sx = 0.5 + 0.5 * (PI / (2.0 * a)).ln();
            assert!((r.entropy_x.value - sx).abs() < 1e-9, "a={a}");
            assert!(r.delta_bh.abs() < 1e-9);
        }
    }

    #[test]
    fn unnormalized_profile_is_rejected() {
        let h = OptimizerParams::standard();
        let spec = GridSpec { half_width: Some(0.2), pad: 1.0, ..small() };
        assert!(matches!(fourier_transform(&h, &spec), Err(Error::NotNormalized(_))));
        assert!(matches!(fourier_transform(&h, &GridSpec::with_n(1000)), Err(Error::BadGridSize(1000))));
    }

    #[test]
    fn carlen_identity_on_translates_and_bumps() {
        let g = fourier_wiener_remainder(&make_shifted_gaussian(1.0).unwrap(), &small()).unwrap();
        assert!(g.delta.abs() < 1e-10 && g.remainder.abs() < 1e-8 && g.residual.abs() < 1e-8, "{g:?}");
        let f = make_bump_family(1.0, 0.5, 6.0).unwrap();
        let r = fourier_wiener_remainder(&f, &GridSpec::default()).unwrap();
        assert!(r.residual.abs() < 5e-6, "{r:?}");
        assert!(r.delta_bh >= -1e-6 && r.delta_bh <= r.delta + 1e-6);
    }

    #[test]
    fn csv_export_has_one_row_per_sample() {
        let prof = fourier_transform(&OptimizerParams::standard(), &GridSpec::with_n(256)).unwrap();
        let csv = prof.to_csv();
        assert_eq!(csv.lines().count(), 257);
        assert!(csv.starts_with("x,h,xi,re_hhat,im_hhat\n"));
        assert_eq!(prof.meta().n, 256);
    }
}
