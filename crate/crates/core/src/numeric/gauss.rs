use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn legendre(m: usize) -> GaussRule {
        assert!(m >= 1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Shared cached rule of order `m`.
    pub fn cached(m: usize) -> GaussRule {
        static CACHE: OnceLock<Mutex<HashMap<usize, GaussRule>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("gauss cache poisoned");
        guard.entry(m).or_insert_with(|| GaussRule::legendre(m)).clone()
    }

    /// Integrate `f` over [lo, hi].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Adaptive Gauss-Kronrod (7-15) integration on [lo, hi].
///
/// Always splits the panel with the largest error estimate until the summed
/// estimate meets `max(tol_abs, tol_rel * |value|)`. Returns the integral and
/// whether the tolerance was met within `max_intervals` panels.
pub fn adaptive_gk15<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    tol_abs: f64,
    tol_rel: f64,
    max_intervals: usize,
) -> (f64, bool) {
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Panel {
        err: f64,
        lo: f64,
        hi: f64,
        val: f64,
    }
    impl Eq for Panel {}
    impl PartialOrd for Panel {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Panel {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err.total_cmp(&other.err)
        }
    }

    let (val, err) = gk15(f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { err, lo, hi, val });
    let mut count = 1usize;
    loop {
        let total: super::NeumaierSum = heap.iter().map(|p| p.val).sum();
        let err_sum: f64 = heap.iter().map(|p| p.err).sum();
        let target = tol_abs.max(tol_rel * total.value().abs());
        if err_sum <= target {
            return (total.value(), true);
        }
        if count >= max_intervals {
            return (total.value(), false);
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            heap.push(Panel { err: 0.0, ..worst });
            let total: super::NeumaierSum = heap.iter().map(|p| p.val).sum();
            return (total.value(), false);
        }
        let (v1, e1) = gk15(f, worst.lo, mid);
        let (v2, e2) = gk15(f, mid, worst.hi);
        heap.push(Panel { err: e1, lo: worst.lo, hi: mid, val: v1 });
        heap.push(Panel { err: e2, lo: mid, hi: worst.hi, val: v2 });
        count += 1;
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7-15 panel: (value, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let val = resk * h;
    let err = ((resk - resg) * h).abs();
    (val, err)
}
