use std::f64::consts::PI;

use ksns::diagnostics::GronwallProblem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `y' = −Ay + h` by RK4 for a periodic train of `sin²` pulses of width
/// `w ≤ σ` and mass `B`, so every window of length `σ` carries exactly `B`.
pub fn pulse_problem(rng: &mut ChaCha8Rng) -> GronwallProblem {
    let a = rng.gen_range(0.05..10.0);
    let b = rng.gen_range(0.0..10.0);
    let sigma = rng.gen_range(0.1..2.0);
    let y0 = rng.gen_range(0.0..10.0);
    let per_period: usize = rng.gen_range(1000..4000);
    let per_pulse: usize = rng.gen_range(per_period / 5..=per_period);
    let dt = sigma / per_period as f64;
    let w = per_pulse as f64 * dt;
    let h = |t: f64| {
        let s = t.rem_euclid(sigma);
        if s < w {
            2.0 * b / w * (PI * s / w).sin().powi(2)
        } else {
            0.0
        }
    };
    let steps = 4 * per_period;
    let mut t = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut hs = Vec::with_capacity(steps + 1);
    let mut yk = y0;
    let f = |t: f64, y: f64| -a * y + h(t);
    for k in 0..=steps {
        let tk = k as f64 * dt;
        t.push(tk);
        y.push(yk);
        hs.push(h(tk));
        let k1 = f(tk, yk);
        let k2 = f(tk + 0.5 * dt, yk + 0.5 * dt * k1);
        let k3 = f(tk + 0.5 * dt, yk + 0.5 * dt * k2);
        let k4 = f(tk + dt, yk + dt * k3);
        yk += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    GronwallProblem { y0, a, b, sigma, t, y, h: hs }
}
