use std::ops::{Add, Mul, Neg, Sub};

/// Truncated Taylor expansion of a scalar in the inputs `(t, ζ)`.
///
/// Carries the value, ∂/∂t, ∂²/∂t², ∂³/∂t³ and ∂/∂ζ. No mixed t–ζ terms
/// are tracked, so a jet is exact for functions whose ζ-dependence enters
/// linearly at first order only.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d_t: f64,
    pub d_tt: f64,
    pub d_ttt: f64,
    pub d_zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Value,
    T,
    TT,
    TTT,
    Zeta,
}

impl Slot {
    pub const ALL: [Slot; 5] = [Slot::Value, Slot::T, Slot::TT, Slot::TTT, Slot::Zeta];
}

impl Jet {
    pub const ZERO: Jet = Jet { value: 0.0, d_t: 0.0, d_tt: 0.0, d_ttt: 0.0, d_zeta: 0.0 };

    pub fn constant(value: f64) -> Self {
        Jet { value, ..Jet::ZERO }
    }

    /// The input `t` itself.
    pub fn seed_t(t: f64) -> Self {
        Jet { value: t, d_t: 1.0, ..Jet::ZERO }
    }

    /// The input `ζ` itself.
    pub fn seed_zeta(zeta: f64) -> Self {
        Jet { value: zeta, d_zeta: 1.0, ..Jet::ZERO }
    }

    pub fn slot(&self, slot: Slot) -> f64 {
        match slot {
            Slot::Value => self.value,
            Slot::T => self.d_t,
            Slot::TT => self.d_tt,
            Slot::TTT => self.d_ttt,
            Slot::Zeta => self.d_zeta,
        }
    }

    pub fn slot_mut(&mut self, slot: Slot) -> &mut f64 {
        match slot {
            Slot::Value => &mut self.value,
            Slot::T => &mut self.d_t,
            Slot::TT => &mut self.d_tt,
            Slot::TTT => &mut self.d_ttt,
            Slot::Zeta => &mut self.d_zeta,
        }
    }

    pub fn scale(self, k: f64) -> Jet {
        Jet {
            value: k * self.value,
            d_t: k * self.d_t,
            d_tt: k * self.d_tt,
            d_ttt: k * self.d_ttt,
            d_zeta: k * self.d_zeta,
        }
    }

    /// `self += k * other`, slot by slot.
    #[inline]
    pub fn add_scaled(&mut self, k: f64, other: &Jet) {
        self.value += k * other.value;
        self.d_t += k * other.d_t;
        self.d_tt += k * other.d_tt;
        self.d_ttt += k * other.d_ttt;
        self.d_zeta += k * other.d_zeta;
    }

    /// Slot-wise dot product.
    #[inline]
    pub fn dot(&self, other: &Jet) -> f64 {
        self.value * other.value
            + self.d_t * other.d_t
            + self.d_tt * other.d_tt
            + self.d_ttt * other.d_ttt
            + self.d_zeta * other.d_zeta
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.d_t.is_finite()
            && self.d_tt.is_finite()
            && self.d_ttt.is_finite()
            && self.d_zeta.is_finite()
    }

    pub fn tanh(self) -> Jet {
        jet_tanh(self)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, b: Jet) -> Jet {
        Jet {
            value: self.value + b.value,
            d_t: self.d_t + b.d_t,
            d_tt: self.d_tt + b.d_tt,
            d_ttt: self.d_ttt + b.d_ttt,
            d_zeta: self.d_zeta + b.d_zeta,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, b: Jet) -> Jet {
        self + (-b)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Leibniz rule truncated at the carried orders.
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, b: Jet) -> Jet {
        let a = self;
        Jet {
            value: a.value * b.value,
            d_t: a.d_t * b.value + a.value * b.d_t,
            d_tt: a.d_tt * b.value + 2.0 * a.d_t * b.d_t + a.value * b.d_tt,
            d_ttt: a.d_ttt * b.value
                + 3.0 * a.d_tt * b.d_t
                + 3.0 * a.d_t * b.d_tt
                + a.value * b.d_ttt,
            d_zeta: a.d_zeta * b.value + a.value * b.d_zeta,
        }
    }
}

/// `[tanh, tanh′, tanh″, tanh‴, tanh⁗]` at `x`.
pub fn tanh_derivatives(x: f64) -> [f64; 5] {
    let y = x.tanh();
    let f1 = 1.0 - y * y;
    let f2 = -2.0 * y * f1;
    let f3 = -2.0 * f1 * f1 - 2.0 * y * f2;
    let f4 = -6.0 * f1 * f2 - 2.0 * y * f3;
    [y, f1, f2, f3, f4]
}

/// tanh through the jet via Faà di Bruno.
pub fn jet_tanh(x: Jet) -> Jet {
    let [y, f1, f2, f3, _] = tanh_derivatives(x.value);
    Jet {
        value: y,
        d_t: f1 * x.d_t,
        d_tt: f2 * x.d_t * x.d_t + f1 * x.d_tt,
        d_ttt: f3 * x.d_t.powi(3) + 3.0 * f2 * x.d_t * x.d_tt + f1 * x.d_ttt,
        d_zeta: f1 * x.d_zeta,
    }
}
