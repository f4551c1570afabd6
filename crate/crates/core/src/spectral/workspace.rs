use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// FFT plans, wavenumbers and the 2/3 dealiasing mask for one periodic grid.
///
/// Real grid functions are transformed in pairs packed as `a + i·b`, so each
/// operator application costs one forward and one inverse complex FFT.
pub struct SpectralWorkspace {
    n: usize,
    wavenumbers: Vec<i64>,
    dealias_mask: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    out: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SpectralWorkspace {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let wavenumbers: Vec<i64> = (0..n as i64)
            .map(|i| if i < n as i64 / 2 { i } else { i - n as i64 })
            .collect();
        let dealias_mask = wavenumbers.iter().map(|k| 3 * k.abs() < n as i64).collect();
        Self {
            n,
            wavenumbers,
            dealias_mask,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); n],
            out: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn wavenumbers(&self) -> &[i64] {
        &self.wavenumbers
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    /// Wavenumber usable in an odd derivative (Nyquist mode dropped).
    fn odd_k(&self, idx: usize) -> f64 {
        if 2 * idx == self.n {
            0.0
        } else {
            self.wavenumbers[idx] as f64
        }
    }

    fn pack_forward(&mut self, a: &[f64], b: &[f64]) {
        for ((z, &x), &y) in self.buf.iter_mut().zip(a).zip(b) {
            *z = Complex64::new(x, y);
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// Splits the transform of `a + i·b` into the transforms of `a` and `b`
    /// at index `idx`.
    fn unpack(&self, idx: usize) -> (Complex64, Complex64) {
        let z = self.buf[idx];
        let zc = self.buf[(self.n - idx) % self.n].conj();
        let a = (z + zc) * 0.5;
        let b = (z - zc) * Complex64::new(0.0, -0.5);
        (a, b)
    }

    fn inverse_into(&mut self, re: &mut [f64], im: &mut [f64]) {
        self.inverse.process_with_scratch(&mut self.out, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for ((z, r), i) in self.out.iter().zip(re.iter_mut()).zip(im.iter_mut()) {
            *r = z.re * s;
            *i = z.im * s;
        }
    }

    /// `L*ρ = −∂ₓ P(f·ρ) + β ∂ₓₓ ρ`, P the 2/3 truncation.
    pub fn adjoint_generator(&mut self, rho: &[f64], drift: &[f64], beta: f64, out: &mut [f64], tmp: &mut [f64]) {
        for ((t, r), f) in tmp.iter_mut().zip(rho).zip(drift) {
            *t = r * f;
        }
        self.pack_forward(rho, tmp);
        for idx in 0..self.n {
            let (r_hat, g_hat) = self.unpack(idx);
            let k = self.wavenumbers[idx] as f64;
            let mut s = r_hat * (-beta * k * k);
            if self.dealias_mask[idx] {
                s -= g_hat * Complex64::new(0.0, self.odd_k(idx));
            }
            self.out[idx] = s;
        }
        self.inverse_into(out, tmp);
    }

    /// `L p = f · P(∂ₓ p) + β ∂ₓₓ p`, the exact transpose of
    /// [`Self::adjoint_generator`] on the grid. Writes `P(∂ₓ p)` into `grad`.
    pub fn generator(&mut self, p: &[f64], drift: &[f64], beta: f64, out: &mut [f64], grad: &mut [f64]) {
        self.buf
            .iter_mut()
            .zip(p)
            .for_each(|(z, &x)| *z = Complex64::new(x, 0.0));
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for idx in 0..self.n {
            let k = self.wavenumbers[idx] as f64;
            let ph = self.buf[idx];
            let d = if self.dealias_mask[idx] {
                ph * Complex64::new(0.0, self.odd_k(idx))
            } else {
                Complex64::new(0.0, 0.0)
            };
            let lap = ph * (-beta * k * k);
            // both inverse transforms are real: pack as d + i·lap
            self.out[idx] = d + lap * Complex64::new(0.0, 1.0);
        }
        self.inverse_into(grad, out);
        for ((o, g), f) in out.iter_mut().zip(grad.iter()).zip(drift) {
            *o += f * g;
        }
    }

    /// Dealiased derivatives `P ∂ₓ a` and `P ∂ₓ b` of two real functions.
    pub fn dealiased_derivative_pair(&mut self, a: &[f64], b: &[f64], da: &mut [f64], db: &mut [f64]) {
        self.pack_forward(a, b);
        for idx in 0..self.n {
            let (a_hat, b_hat) = self.unpack(idx);
            self.out[idx] = if self.dealias_mask[idx] {
                let ik = Complex64::new(0.0, self.odd_k(idx));
                a_hat * ik + b_hat * ik * Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        self.inverse_into(da, db);
    }

    /// Full spectral derivative ∂ₓ a (no truncation beyond the Nyquist mode).
    pub fn derivative(&mut self, a: &[f64]) -> Vec<f64> {
        self.buf
            .iter_mut()
            .zip(a)
            .for_each(|(z, &x)| *z = Complex64::new(x, 0.0));
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for idx in 0..self.n {
            self.out[idx] = self.buf[idx] * Complex64::new(0.0, self.odd_k(idx));
        }
        let mut re = vec![0.0; self.n];
        let mut im = vec![0.0; self.n];
        self.inverse_into(&mut re, &mut im);
        re
    }

    /// Fourier coefficients of a real grid function (unnormalized).
    pub fn spectrum(&mut self, a: &[f64]) -> Vec<Complex64> {
        self.buf
            .iter_mut()
            .zip(a)
            .for_each(|(z, &x)| *z = Complex64::new(x, 0.0));
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.buf.clone()
    }
}
