#![allow(dead_code)]

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use swaycue_core::audio::{map_params, RenderConfig, SynthState};
use swaycue_core::SwayPoint;

/// One-sided Welch PSD with a Hann window and 50% overlap.
pub fn welch(signal: &[f64], fs: f64, nperseg: usize) -> (Vec<f64>, Vec<f64>) {
    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nperseg as f64).cos())
        .collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nperseg);
    let bins = nperseg / 2 + 1;
    let mut psd = vec![0.0; bins];
    let mut segments = 0;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    while start + nperseg <= signal.len() {
        let seg = &signal[start..start + nperseg];
        let mean = seg.iter().sum::<f64>() / nperseg as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            let scale = if k == 0 || k == nperseg / 2 { 1.0 } else { 2.0 };
            *p += scale * buf[k].norm_sqr() / (fs * wpow);
        }
        segments += 1;
        start += nperseg / 2;
    }
    for p in &mut psd {
        *p /= segments as f64;
    }
    let freqs = (0..bins).map(|k| k as f64 * fs / nperseg as f64).collect();
    (freqs, psd)
}

/// Combined PSD of both channels.
pub fn stereo_psd(frames: &[[f32; 2]], fs: f64) -> (Vec<f64>, Vec<f64>) {
    let l: Vec<f64> = frames.iter().map(|f| f[0] as f64).collect();
    let r: Vec<f64> = frames.iter().map(|f| f[1] as f64).collect();
    let (freqs, pl) = welch(&l, fs, 4096);
    let (_, pr) = welch(&r, fs, 4096);
    (freqs, pl.iter().zip(&pr).map(|(a, b)| a + b).collect())
}

pub fn band_energy_fraction(freqs: &[f64], psd: &[f64], lo: f64, hi: f64) -> f64 {
    let total: f64 = psd.iter().sum();
    let inside: f64 = freqs
        .iter()
        .zip(psd)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, p)| p)
        .sum();
    inside / total
}

/// Least-squares slope of third-octave band levels, dB per octave.
pub fn psd_slope_db_per_octave(freqs: &[f64], psd: &[f64], lo: f64, hi: f64) -> f64 {
    let mut pts = Vec::new();
    let mut edge = lo;
    while edge * 2f64.powf(1.0 / 3.0) <= hi * 1.0001 {
        let top = edge * 2f64.powf(1.0 / 3.0);
        let vals: Vec<f64> = freqs
            .iter()
            .zip(psd)
            .filter(|(f, _)| **f >= edge && **f < top)
            .map(|(_, p)| *p)
            .collect();
        if !vals.is_empty() {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            pts.push(((edge * top).sqrt().log2(), 10.0 * mean.log10()));
        }
        edge = top;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Renders `seconds` of the sound for a fixed sway point, after `warmup`
/// seconds that are discarded.
pub fn render_point(x: f64, y: f64, seconds: f64, warmup: f64, cfg: &RenderConfig) -> Vec<[f32; 2]> {
    let params = map_params(&SwayPoint::new(0.0, x, y));
    let mut state = SynthState::new(cfg);
    let sr = cfg.sample_rate as f64;
    let mut skip = vec![[0.0f32; 2]; (warmup * sr).round() as usize];
    for chunk in skip.chunks_mut(cfg.block_size) {
        state.render_block(&params, chunk);
    }
    let mut out = vec![[0.0f32; 2]; (seconds * sr).round() as usize];
    for chunk in out.chunks_mut(cfg.block_size) {
        state.render_block(&params, chunk);
    }
    out
}

/// RMS over both channels combined: sqrt(mean(L² + R²)).
pub fn stereo_rms(frames: &[[f32; 2]]) -> f64 {
    let s: f64 = frames.iter().map(|f| (f[0] as f64).powi(2) + (f[1] as f64).powi(2)).sum();
    (s / frames.len() as f64).sqrt()
}

/// Period of an on/off envelope from the first autocorrelation peak, in
/// seconds. The envelope is the signal power in 1 ms frames.
pub fn envelope_period(signal: &[f64], fs: f64) -> f64 {
    let hop = (fs / 1000.0).round() as usize;
    let env: Vec<f64> = signal.chunks_exact(hop).map(|c| c.iter().map(|v| v * v).sum::<f64>() / hop as f64).collect();
    let mean = env.iter().sum::<f64>() / env.len() as f64;
    let e: Vec<f64> = env.iter().map(|v| v - mean).collect();
    let ac = |lag: usize| -> f64 {
        e.iter().zip(&e[lag..]).map(|(a, b)| a * b).sum::<f64>() / (e.len() - lag) as f64
    };
    let max_lag = e.len() / 2;
    let acs: Vec<f64> = (0..max_lag).map(ac).collect();
    let first_neg = acs.iter().position(|v| *v < 0.0).expect("envelope never decorrelates");
    let first_pos = first_neg + acs[first_neg..].iter().position(|v| *v > 0.0).expect("no second lobe");
    let lobe_end = first_pos + acs[first_pos..].iter().position(|v| *v < 0.0).unwrap_or(max_lag - first_pos);
    let k = (first_pos..lobe_end).max_by(|a, b| acs[*a].total_cmp(&acs[*b])).unwrap();
    // parabolic refinement around the discrete peak
    let frac = if k > 0 && k + 1 < acs.len() {
        let (a, b, c) = (acs[k - 1], acs[k], acs[k + 1]);
        let d = a - 2.0 * b + c;
        if d != 0.0 { 0.5 * (a - c) / d } else { 0.0 }
    } else {
        0.0
    };
    (k as f64 + frac) * hop as f64 / fs
}
