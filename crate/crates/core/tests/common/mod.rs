//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's series code: the hypergeometric
//! oracles sum the defining power series in double-double arithmetic and
//! the distribution oracles integrate the defining densities numerically.

#![allow(dead_code, clippy::excessive_precision)]

use std::collections::BinaryHeap;

use dashu_float::FBig;

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::from(-q1)));
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::from(-q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn abs(self) -> f64 {
        self.hi.abs()
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Extended-precision scalar used by the brute sums.
pub trait Ext: Clone {
    /// Embeds `x` at the same working precision as `self`.
    fn lift(&self, x: f64) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn over(&self, o: &Self) -> Self;
    fn approx(&self) -> f64;
}

impl Ext for Dd {
    fn lift(&self, x: f64) -> Self {
        Dd::from(x)
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(*o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(*o)
    }
    fn over(&self, o: &Self) -> Self {
        self.div(*o)
    }
    fn approx(&self) -> f64 {
        self.to_f64()
    }
}

/// Binary floating point with a fixed number of mantissa bits.
#[derive(Clone)]
pub struct Big {
    v: FBig,
    bits: usize,
}

impl Big {
    pub fn one(bits: usize) -> Big {
        Big {
            v: FBig::ONE.with_precision(bits).value(),
            bits,
        }
    }
}

impl Ext for Big {
    fn lift(&self, x: f64) -> Self {
        let v = FBig::try_from(x).expect("finite").with_precision(self.bits).value();
        Big { v, bits: self.bits }
    }
    fn plus(&self, o: &Self) -> Self {
        Big {
            v: &self.v + &o.v,
            bits: self.bits,
        }
    }
    fn times(&self, o: &Self) -> Self {
        Big {
            v: &self.v * &o.v,
            bits: self.bits,
        }
    }
    fn over(&self, o: &Self) -> Self {
        Big {
            v: &self.v / &o.v,
            bits: self.bits,
        }
    }
    fn approx(&self) -> f64 {
        self.v.to_f64().value()
    }
}

/// `p + k` exactly; rounding the shifted parameter to f64 first would let
/// cancellation in alternating series amplify the representation error.
fn shift<T: Ext>(one: &T, p: f64, k: f64) -> T {
    one.lift(p).plus(&one.lift(k))
}

/// Caps on the brute double sum. The row cap is larger than the column cap
/// because at |y| = 0.9 with β near 10 the rows decay only geometrically.
pub const BRUTE_M_CAP: usize = 400;
pub const BRUTE_N_CAP: usize = 2500;

/// Sum of the Φ₁ double series and of its absolute terms.
fn phi1_double_sum<T: Ext>(one: &T, alpha: f64, beta: f64, gamma: f64, x: f64, y: f64) -> Result<(f64, f64), String> {
    let negligible = 1e-40;
    let mut total = one.lift(0.0);
    let mut abs_total = 0.0_f64;
    let mut base = one.clone(); // (α)_n (β)_n yⁿ / ((γ)_n n!)
    let (xe, ye) = (one.lift(x), one.lift(y));
    let mut quiet_rows = 0;
    for n in 0..=BRUTE_N_CAP {
        let nf = n as f64;
        let mut t = base.clone();
        let mut row = t.clone();
        let mut row_abs = t.approx().abs();
        let mut settled = false;
        for m in 0..BRUTE_M_CAP {
            let mf = m as f64;
            let num = shift(one, alpha, nf + mf).times(&xe);
            let den = shift(one, gamma, nf + mf).times(&one.lift(mf + 1.0));
            t = t.times(&num.over(&den));
            row = row.plus(&t);
            let ta = t.approx().abs();
            row_abs += ta;
            if ta == 0.0 || (mf + 1.0 > 2.0 * x.abs() && ta <= negligible * row_abs) {
                settled = true;
                break;
            }
        }
        if !settled {
            return Err(format!("column cap {BRUTE_M_CAP} reached at row {n}"));
        }
        total = total.plus(&row);
        abs_total += row_abs;
        let coef_ratio = (alpha + nf) * (beta + nf) / ((gamma + nf) * (nf + 1.0)) * y;
        if coef_ratio == 0.0 {
            return Ok((total.approx(), abs_total));
        }
        if row_abs <= negligible * abs_total && coef_ratio.abs() < 1.0 {
            quiet_rows += 1;
            if quiet_rows >= 5 {
                return Ok((total.approx(), abs_total));
            }
        } else {
            quiet_rows = 0;
        }
        let num = shift(one, alpha, nf).times(&shift(one, beta, nf)).times(&ye);
        let den = shift(one, gamma, nf).times(&one.lift(nf + 1.0));
        base = base.times(&num.over(&den));
    }
    Err(format!("row cap {BRUTE_N_CAP} reached"))
}

/// Brute-force double summation of the Φ₁ defining series.
///
/// A double-double pass measures the cancellation `Σ|t| / |Σt|`; when that
/// would eat into the answer the sum is redone in arbitrary precision with
/// enough extra bits to cover it. Returns an error (never a silently
/// truncated value) when either cap is reached first.
pub fn brute_phi1(alpha: f64, beta: f64, gamma: f64, x: f64, y: f64) -> Result<f64, String> {
    let (v, abs) = phi1_double_sum(&Dd::ONE, alpha, beta, gamma, x, y)?;
    let cancel = abs / v.abs();
    if cancel.is_finite() && cancel < 1e12 {
        return Ok(v);
    }
    let mut bits = 128 + (abs.log2() - v.abs().log2().max(-1000.0)).max(0.0) as usize;
    loop {
        let (v, abs) = phi1_double_sum(&Big::one(bits), alpha, beta, gamma, x, y)?;
        let spare = bits as f64 - (abs / v.abs()).log2();
        if spare >= 100.0 {
            return Ok(v);
        }
        if bits > 4096 {
            return Err("cancellation beyond 4096 bits".into());
        }
        bits *= 2;
    }
}

/// `₁F₁(α; γ; x)` by a fixed number of terms in double-double.
pub fn brute_1f1(alpha: f64, gamma: f64, x: f64, terms: usize) -> f64 {
    let mut t = Dd::ONE;
    let mut s = Dd::ONE;
    for m in 0..terms {
        let mf = m as f64;
        t = t.mul(
            shift(&Dd::ONE, alpha, mf)
                .mul(Dd::from(x))
                .div(shift(&Dd::ONE, gamma, mf).mul(Dd::from(mf + 1.0))),
        );
        s = s.add(t);
    }
    s.to_f64()
}

/// `₂F₁(α, β; γ; y)` by a fixed number of terms in double-double.
pub fn brute_2f1(alpha: f64, beta: f64, gamma: f64, y: f64, terms: usize) -> f64 {
    let mut t = Dd::ONE;
    let mut s = Dd::ONE;
    for n in 0..terms {
        let nf = n as f64;
        t = t.mul(
            shift(&Dd::ONE, alpha, nf)
                .mul(shift(&Dd::ONE, beta, nf))
                .mul(Dd::from(y))
                .div(shift(&Dd::ONE, gamma, nf).mul(Dd::from(nf + 1.0))),
        );
        s = s.add(t);
    }
    s.to_f64()
}

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod (7/15) quadrature.

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(PartialEq)]
struct Panel {
    err: f64,
    a: f64,
    b: f64,
    val: f64,
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    heap.push(Panel { err: e, a, b, val: v });
    let (mut total, mut err) = (v, e);
    for _ in 0..20_000 {
        if err <= rel_tol * total.abs() || err < 1e-300 {
            break;
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Panel {
            err: e1,
            a: p.a,
            b: m,
            val: v1,
        });
        heap.push(Panel {
            err: e2,
            a: m,
            b: p.b,
            val: v2,
        });
    }
    // re-add to limit drift from the running updates
    heap.into_iter().map(|p| p.val).sum()
}

/// `∫₀¹ f(κ) κ^{a−1}(1−κ)^{b−1} {1/τ² + (1−1/τ²)κ}^{−1} e^{−sκ} dκ`.
///
/// The endpoint power singularities are removed analytically: on `(0, ½]`
/// the substitution `κ = ½u^{1/a}` absorbs `κ^{a−1}`, on `[½, 1)` the
/// substitution `1−κ = ½v^{1/b}` absorbs `(1−κ)^{b−1}`.
pub fn kernel_quad<F: Fn(f64) -> f64>(a: f64, b: f64, tau: f64, s: f64, f: F) -> f64 {
    let t2 = tau * tau;
    let smooth = |k: f64| f(k) / (1.0 / t2 + (1.0 - 1.0 / t2) * k) * (-s * k).exp();
    let left = |u: f64| {
        let k = 0.5 * u.powf(1.0 / a);
        smooth(k) * (1.0 - k).powf(b - 1.0)
    };
    let right = |v: f64| {
        let one_minus = 0.5 * v.powf(1.0 / b);
        let k = 1.0 - one_minus;
        smooth(k) * k.powf(a - 1.0)
    };
    let l = integrate(left, 0.0, 1.0, 1e-14) * 0.5f64.powf(a) / a;
    let r = integrate(right, 0.0, 1.0, 1e-14) * 0.5f64.powf(b) / b;
    l + r
}

/// Standard normal CDF, computed without the library.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}
