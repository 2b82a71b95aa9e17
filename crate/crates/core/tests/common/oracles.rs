use physaug::metrics::ConfusionMatrix;

/// Kappa from expanded label vectors, as a general k-class agreement table.
pub fn kappa_reference(cm: &ConfusionMatrix) -> f64 {
    let mut pairs = Vec::new();
    pairs.extend(std::iter::repeat_n((1usize, 1usize), cm.tp as usize));
    pairs.extend(std::iter::repeat_n((0, 0), cm.tn as usize));
    pairs.extend(std::iter::repeat_n((0, 1), cm.fp as usize));
    pairs.extend(std::iter::repeat_n((1, 0), cm.fn_ as usize));
    let n = pairs.len() as f64;
    let mut table = [[0.0; 2]; 2];
    for (t, p) in &pairs {
        table[*t][*p] += 1.0;
    }
    let observed = (table[0][0] + table[1][1]) / n;
    let expected: f64 = (0..2)
        .map(|c| (table[c][0] + table[c][1]) / n * (table[0][c] + table[1][c]) / n)
        .sum();
    if (1.0 - expected).abs() < 1e-15 {
        0.0
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

/// Direct double-loop unbiased MMD² with `k = exp(-|a-b|² / 2σ²)`.
pub fn mmd_reference(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64) -> f64 {
    let k = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
        (-d / (2.0 * sigma * sigma)).exp()
    };
    let (n, m) = (x.len() as f64, y.len() as f64);
    let mut kxx = 0.0;
    for (i, a) in x.iter().enumerate() {
        for (j, b) in x.iter().enumerate() {
            if i != j {
                kxx += k(a, b);
            }
        }
    }
    let mut kyy = 0.0;
    for (i, a) in y.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            if i != j {
                kyy += k(a, b);
            }
        }
    }
    let mut kxy = 0.0;
    for a in x {
        for b in y {
            kxy += k(a, b);
        }
    }
    kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let t = x + 7.5;
    let s: f64 = C[0] + (1..9).map(|i| C[i] / (x + i as f64)).sum::<f64>();
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Upper tail of Student's t by composite Simpson's rule on the density.
pub fn t_sf_simpson(t: f64, df: f64) -> f64 {
    let c = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
    let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    // Substitute x = t + u / (1 - u) to map [t, ∞) onto [0, 1).
    let f = |u: f64| if u >= 1.0 { 0.0 } else { pdf(t + u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) };
    let steps = 200_000;
    let h = 1.0 / steps as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..steps {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
