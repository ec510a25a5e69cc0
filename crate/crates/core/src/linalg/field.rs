//! Prime-field arithmetic over `Z_q` with `q < 2^32`.
//!
//! Elements are `u32` words in `[0, q)`. Products are formed in `u64` and
//! inner products accumulate up to [`FieldParams::chunk_len`] products before
//! a reduction, which is the largest count that cannot overflow a `u64`
//! accumulator already holding a canonical value.

use crate::error::{Error, Result};

/// The Mersenne prime `2^31 - 1`, the default modulus.
pub const MERSENNE31: u32 = 0x7FFF_FFFF;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldParams {
    q: u32,
    chunk: usize,
}

impl FieldParams {
    /// Builds the field `Z_q`, rejecting composite or out-of-range moduli.
    pub fn new(q: u64) -> Result<Self> {
        if !(2..1u64 << 32).contains(&q) {
            return Err(Error::Field(format!("modulus {q} outside [2, 2^32)")));
        }
        let q = q as u32;
        if !is_prime(q) {
            return Err(Error::Field(format!("modulus {q} is not prime")));
        }
        let max = u64::from(q - 1);
        let chunk = ((u64::MAX - max) / (max * max)).clamp(1, 1 << 30) as usize;
        Ok(Self { q, chunk })
    }

    pub fn mersenne31() -> Self {
        Self::new(u64::from(MERSENNE31)).expect("2^31-1 is prime")
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn is_mersenne31(&self) -> bool {
        self.q == MERSENNE31
    }

    /// Number of `(q-1)^2` products that may be summed into a `u64` holding
    /// a value `< q` without overflow.
    #[inline]
    pub fn chunk_len(&self) -> usize {
        self.chunk
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u32 {
        if self.is_mersenne31() {
            Mersenne31.reduce(x)
        } else {
            (x % u64::from(self.q)) as u32
        }
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = u64::from(a) + u64::from(b);
        let q = u64::from(self.q);
        (if s >= q { s - q } else { s }) as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            (u64::from(a) + u64::from(self.q) - u64::from(b)) as u32
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.reduce(u64::from(a) * u64::from(b))
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        let a = a % self.q;
        (a != 0).then(|| self.pow(a, u64::from(self.q) - 2))
    }

    /// Maps an arbitrary unsigned integer into the field.
    #[inline]
    pub fn from_u64(&self, x: u64) -> u32 {
        (x % u64::from(self.q)) as u32
    }

    #[inline]
    pub fn is_canonical(&self, x: u32) -> bool {
        x < self.q
    }
}

impl Default for FieldParams {
    fn default() -> Self {
        Self::mersenne31()
    }
}

/// Reduction strategy used by the monomorphized multiplication kernels.
pub(crate) trait Reducer: Copy + Send + Sync {
    fn reduce(self, x: u64) -> u32;
}

#[derive(Clone, Copy)]
pub(crate) struct Mersenne31;

impl Reducer for Mersenne31 {
    #[inline(always)]
    fn reduce(self, x: u64) -> u32 {
        let m = u64::from(MERSENNE31);
        let t = (x & m) + (x >> 31);
        let t = (t & m) + (t >> 31);
        (if t >= m { t - m } else { t }) as u32
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Generic(pub u64);

impl Reducer for Generic {
    #[inline(always)]
    fn reduce(self, x: u64) -> u32 {
        (x % self.0) as u32
    }
}

/// Deterministic Miller-Rabin; bases {2, 7, 61} are exact below 2^32.
pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13, 61] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let n64 = u64::from(n);
    let mulmod = |a: u64, b: u64| a * b % n64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n64 - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        let mut x = powmod(a, d);
        if x == 1 || x == n64 - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n64 - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
