//! Adaptive Gauss–Kronrod (7/15) quadrature and bracketed root finding.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes plus the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 48;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    let mid = 0.5 * (a + b);
    if err <= tol || depth >= MAX_DEPTH || mid <= a || mid >= b {
        return value;
    }
    adapt(f, a, mid, 0.5 * tol, depth + 1) + adapt(f, mid, b, 0.5 * tol, depth + 1)
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    adapt(&f, a, b, tol, 0)
}

/// Integral over `[a, b]` split at every breakpoint strictly inside it, so
/// that each call sees a smooth integrand.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let share = tol / (edges.len() - 1) as f64;
    edges
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], share))
        .sum()
}

/// Bisection on a sign change of `f` over `[lo, hi]`. An endpoint that is an
/// exact zero is returned as is; `None` if there is no sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|t| 3.0 * t * t + 2.0 * t + 1.0, 0.0, 2.0, 1e-13);
        assert!((v - 14.0).abs() < 1e-13);
    }

    #[test]
    fn rational_integrand() {
        // ∫_0^1 1/(1+t)^2 dt = 1/2
        let v = integrate(|t| 1.0 / (1.0 + t).powi(2), 0.0, 1.0, 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kink_handled_by_split() {
        let v = integrate_split(|t: f64| (t - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn step_with_split_is_exact() {
        let v = integrate_split(|t| if t < 0.4 { 1.0 } else { 3.0 }, 0.0, 1.0, &[0.4], 1e-12);
        assert!((v - (0.4 + 1.8)).abs() < 1e-13);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|t| t * t - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(bisect(|t| t * t + 1.0, -1.0, 1.0, 1e-12).is_none());
        assert_eq!(bisect(|t| t - 1.0, 0.0, 1.0, 1e-12), Some(1.0));
    }
}
