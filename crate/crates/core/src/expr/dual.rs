use super::{Func, Scalar, MAX_VARS};

/// Dual number with a dense tangent of [`MAX_VARS`] components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: [f64; MAX_VARS],
}

impl Dual {
    pub fn constant(re: f64) -> Self {
        Dual {
            re,
            eps: [0.0; MAX_VARS],
        }
    }

    pub fn variable(re: f64, pos: usize) -> Self {
        let mut d = Dual::constant(re);
        d.eps[pos] = 1.0;
        d
    }

    pub fn tangent(&self, n: usize) -> Vec<f64> {
        self.eps[..n].to_vec()
    }

    /// Chain rule for a scalar function with value `f` and derivative `df`.
    fn chain(self, f: f64, df: f64) -> Self {
        let mut eps = [0.0; MAX_VARS];
        for (o, e) in eps.iter_mut().zip(self.eps.iter()) {
            *o = df * e;
        }
        Dual { re: f, eps }
    }

    fn zip(self, o: Self, re: f64, a: f64, b: f64) -> Self {
        let mut eps = [0.0; MAX_VARS];
        for i in 0..MAX_VARS {
            eps[i] = a * self.eps[i] + b * o.eps[i];
        }
        Dual { re, eps }
    }
}

impl Scalar for Dual {
    fn constant(c: f64) -> Self {
        Dual::constant(c)
    }

    fn variable(x: f64, pos: usize) -> Self {
        Dual::variable(x, pos)
    }

    fn value(&self) -> f64 {
        self.re
    }

    fn is_constant(&self) -> bool {
        self.eps.iter().all(|e| *e == 0.0)
    }

    fn add(self, o: Self) -> Self {
        self.zip(o, self.re + o.re, 1.0, 1.0)
    }

    fn sub(self, o: Self) -> Self {
        self.zip(o, self.re - o.re, 1.0, -1.0)
    }

    fn mul(self, o: Self) -> Self {
        self.zip(o, self.re * o.re, o.re, self.re)
    }

    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        self.zip(o, self.re * inv, inv, -self.re * inv * inv)
    }

    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }

    fn powi(self, k: i32) -> Self {
        match k {
            0 => Dual::constant(1.0),
            _ => self.chain(self.re.powi(k), k as f64 * self.re.powi(k - 1)),
        }
    }

    fn powf(self, e: Self) -> Self {
        // b^e = exp(e ln b), base already checked positive
        let ln_b = self.re.ln();
        let v = (e.re * ln_b).exp();
        self.zip(e, v, v * e.re / self.re, v * ln_b)
    }

    fn apply(self, f: Func) -> Self {
        let x = self.re;
        match f {
            Func::Sin => self.chain(x.sin(), x.cos()),
            Func::Cos => self.chain(x.cos(), -x.sin()),
            Func::Exp => {
                let e = x.exp();
                self.chain(e, e)
            }
            Func::Log => self.chain(x.ln(), 1.0 / x),
            Func::Sqrt => {
                let s = x.sqrt();
                if self.is_constant() {
                    Dual::constant(s)
                } else {
                    self.chain(s, 0.5 / s)
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.iter().all(|e| e.is_finite())
    }
}
