//! Iterative radix-2 FFT and the causal convolution built on it.

/// In-place radix-2 Cooley-Tukey transform on interleaved (re, im) pairs.
/// `n` must be a power of two. `inverse` applies the conjugate transform and
/// the 1/n scaling.
pub fn fft_inplace(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    assert_eq!(im.len(), n);
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * std::f64::consts::TAU / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let (mut cr, mut ci) = (1.0, 0.0);
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * cr - im[b] * ci;
                let ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            start += len;
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for (r, i) in re.iter_mut().zip(im.iter_mut()) {
            *r *= scale;
            *i *= scale;
        }
    }
}

/// Causal convolution `out[t] = sum_{l=0..min(t, Tk-1)} kernel[l] * signal[t-l]`,
/// truncated to the signal length. Both inputs are zero-padded to the next
/// power of two at least `Tk + Ts - 1` before the transforms.
pub fn fft_causal_conv(kernel: &[f64], signal: &[f64]) -> Vec<f64> {
    let (tk, ts) = (kernel.len(), signal.len());
    if tk == 0 || ts == 0 {
        return vec![0.0; ts];
    }
    let n = (tk + ts - 1).next_power_of_two();

    let mut kr = vec![0.0; n];
    let mut ki = vec![0.0; n];
    kr[..tk].copy_from_slice(kernel);
    let mut sr = vec![0.0; n];
    let mut si = vec![0.0; n];
    sr[..ts].copy_from_slice(signal);

    fft_inplace(&mut kr, &mut ki, false);
    fft_inplace(&mut sr, &mut si, false);
    for idx in 0..n {
        let r = kr[idx] * sr[idx] - ki[idx] * si[idx];
        let i = kr[idx] * si[idx] + ki[idx] * sr[idx];
        kr[idx] = r;
        ki[idx] = i;
    }
    fft_inplace(&mut kr, &mut ki, true);
    kr.truncate(ts);
    kr
}

/// Direct O(Tk*Ts) causal convolution; the reference the FFT path is checked
/// against.
pub fn direct_causal_conv(kernel: &[f64], signal: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; signal.len()];
    for (t, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (l, &k) in kernel.iter().enumerate().take(t + 1) {
            s += k * signal[t - l];
        }
        *o = s;
    }
    out
}
