use crate::error::{Error, Result};
use crate::quadrature::adaptive;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Family of a Dini modulus of continuity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModulusFamily {
    Zero,
    /// θ(r) = c·r^a; a = 0 gives the constant modulus.
    Power { c: f64, a: f64 },
    /// θ(r) = c/(1+log(1/r))² for r < 1, extended by the constant c beyond 1.
    Log { c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulusValues {
    pub theta: f64,
    pub theta_tilde: f64,
    pub alpha: f64,
    pub dini: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiniModulus {
    pub family: ModulusFamily,
}

impl DiniModulus {
    pub fn new(family: ModulusFamily) -> Result<Self> {
        match family {
            ModulusFamily::Zero => {}
            ModulusFamily::Power { c, a } => {
                if !(c > 0.0 && c.is_finite()) || !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "power modulus needs c > 0, a >= 0 (got c={c}, a={a})"
                    )));
                }
            }
            ModulusFamily::Log { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!("log modulus needs c > 0 (got {c})")));
                }
            }
        }
        Ok(DiniModulus { family })
    }

    pub fn zero() -> Self {
        DiniModulus { family: ModulusFamily::Zero }
    }

    pub fn power(c: f64, a: f64) -> Result<Self> {
        Self::new(ModulusFamily::Power { c, a })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(ModulusFamily::Power { c, a: 0.0 })
    }

    pub fn log(c: f64) -> Result<Self> {
        Self::new(ModulusFamily::Log { c })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, ModulusFamily::Zero)
    }

    pub fn theta(&self, r: f64) -> f64 {
        match self.family {
            ModulusFamily::Zero => 0.0,
            ModulusFamily::Power { c, a } => {
                if a == 0.0 {
                    c
                } else {
                    c * r.powf(a)
                }
            }
            ModulusFamily::Log { c } => {
                if r >= 1.0 {
                    c
                } else if r <= 0.0 {
                    0.0
                } else {
                    let w = 1.0 - r.ln();
                    c / (w * w)
                }
            }
        }
    }

    /// Antiderivative of θ(s)/s for the log family, normalized to vanish at 0.
    fn log_primitive(c: f64, s: f64) -> f64 {
        if s <= 1.0 {
            c / (1.0 - s.ln())
        } else {
            c + c * s.ln()
        }
    }

    /// Smoothed modulus: (1/log²2)∫_r^{2r}(1/t)∫_t^{2t}θ(s)/s ds dt.
    pub fn theta_tilde(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.family {
            ModulusFamily::Zero => 0.0,
            ModulusFamily::Power { c, a } => c * r.powf(a) * power_factor(a),
            ModulusFamily::Log { c } => {
                if 4.0 * r <= 1.0 {
                    let w = |s: f64| 1.0 - s.ln();
                    c / (LN_2 * LN_2)
                        * (((w(2.0 * r)) / w(4.0 * r)).ln() - (w(r) / w(2.0 * r)).ln())
                } else {
                    let inner = |t: f64| Self::log_primitive(c, 2.0 * t) - Self::log_primitive(c, t);
                    let f = |t: f64| inner(t) / t;
                    // Kinks of the extension sit at t = 1/2 and t = 1.
                    let mut cuts = vec![r];
                    for k in [0.5, 1.0] {
                        if k > r && k < 2.0 * r {
                            cuts.push(k);
                        }
                    }
                    cuts.push(2.0 * r);
                    let total: f64 = cuts.windows(2).map(|w| adaptive(f, w[0], w[1], 1e-13)).sum();
                    total / (LN_2 * LN_2)
                }
            }
        }
    }

    /// α(r) = 3·d/dr(r·θ̃(r)).
    pub fn alpha(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return match self.family {
                ModulusFamily::Power { c, a } if a == 0.0 => 3.0 * c,
                _ => 0.0,
            };
        }
        match self.family {
            ModulusFamily::Zero => 0.0,
            ModulusFamily::Power { a, .. } => 3.0 * (1.0 + a) * self.theta_tilde(r),
            ModulusFamily::Log { c } => {
                if 4.0 * r <= 1.0 {
                    let w = |s: f64| 1.0 - s.ln();
                    let deriv = c / (LN_2 * LN_2 * r) * (1.0 / w(r) - 2.0 / w(2.0 * r) + 1.0 / w(4.0 * r));
                    3.0 * (self.theta_tilde(r) + r * deriv)
                } else {
                    let h = r * 1e-4;
                    let g = |s: f64| s * self.theta_tilde(s);
                    3.0 * (g(r + h) - g(r - h)) / (2.0 * h)
                }
            }
        }
    }

    /// ∫₀^r θ(s)/s ds; infinite for the constant modulus.
    pub fn dini(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.family {
            ModulusFamily::Zero => 0.0,
            ModulusFamily::Power { c, a } => {
                if a == 0.0 {
                    f64::INFINITY
                } else {
                    c * r.powf(a) / a
                }
            }
            ModulusFamily::Log { c } => Self::log_primitive(c, r),
        }
    }

    /// All four quantities; errors on nonpositive radius or infinite Dini integral.
    pub fn values(&self, r: f64) -> Result<ModulusValues> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::RadiusOutOfRange { r, max: f64::INFINITY });
        }
        let dini = self.dini(r);
        if !dini.is_finite() {
            return Err(Error::InfiniteDini);
        }
        Ok(ModulusValues {
            theta: self.theta(r),
            theta_tilde: self.theta_tilde(r),
            alpha: self.alpha(r),
            dini,
        })
    }

    /// Largest R (on a geometric search) with θ(8R) < 1/72 and ∫₀^{16R} θ/s ≤ 1.
    pub fn admissible_scale(&self) -> f64 {
        let ok = |r: f64| self.theta(8.0 * r) < 1.0 / 72.0 && self.dini(16.0 * r) <= 1.0;
        let mut r: f64 = 1.0;
        while !ok(r) && r > 1e-300 {
            r *= 0.5;
        }
        let (mut lo, mut hi) = (r, 2.0 * r);
        if ok(hi) {
            return hi;
        }
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if ok(m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        lo
    }
}

fn power_factor(a: f64) -> f64 {
    if a.abs() < 1e-8 {
        let t = a * LN_2;
        // ((2^a − 1)/(a log 2))² expanded near a = 0
        let q = 1.0 + t / 2.0 + t * t / 6.0;
        q * q
    } else {
        let q = (2f64.powf(a) - 1.0) / (a * LN_2);
        q * q
    }
}
