//! Small numeric helpers shared across modules.

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
///
/// Runs until the bracket width falls below `tol` (absolute, in the units of
/// the search variable) or `max_iter` shrink steps. Returns `(x_min, f_min)`.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    debug_assert!(b >= a);
    const INV_PHI: f64 = 0.618_033_988_749_894_9; // (√5 − 1) / 2

    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }

    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if f1 <= f2 && f1 <= fm {
        (x1, f1)
    } else if f2 <= fm {
        (x2, f2)
    } else {
        (mid, fm)
    }
}

/// Deterministic, platform-independent mix of a base seed and a stream tag,
/// used to derive independent RNG streams per (module, seed[, camera]).
pub fn mix_seed(seed: u64, tag: &str) -> u64 {
    // splitmix64 over the seed, folding in the tag bytes FNV-style first.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample mean of a slice (0.0 for an empty slice).
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sample standard deviation (n − 1 denominator; 0.0 for n < 2).
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
