//! Integer-valued weights `w(n) ∈ {-1, 0, 1}` fed into the averages.

use crate::sieves::{LiouvilleTable, MobiusTable};

pub trait ArithmeticWeight: Sync {
    /// `w(n)` for `1 <= n <= range()`.
    fn weight(&self, n: u64) -> i8;
    /// Largest `n` the weight is defined on.
    fn range(&self) -> u64;
    fn id(&self) -> String;
}

impl ArithmeticWeight for MobiusTable {
    fn weight(&self, n: u64) -> i8 {
        self.get(n)
    }

    fn range(&self) -> u64 {
        self.n_max()
    }

    fn id(&self) -> String {
        "mu".into()
    }
}

impl ArithmeticWeight for LiouvilleTable {
    fn weight(&self, n: u64) -> i8 {
        self.get(n)
    }

    fn range(&self) -> u64 {
        self.n_max()
    }

    fn id(&self) -> String {
        "liouville".into()
    }
}

/// Constant weight on `[1, range]`.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub value: i8,
    pub range: u64,
}

impl Constant {
    pub fn one(range: u64) -> Self {
        Self { value: 1, range }
    }

    pub fn zero(range: u64) -> Self {
        Self { value: 0, range }
    }
}

impl ArithmeticWeight for Constant {
    fn weight(&self, _n: u64) -> i8 {
        self.value
    }

    fn range(&self) -> u64 {
        self.range
    }

    fn id(&self) -> String {
        format!("const{}", self.value)
    }
}

/// `w(n) 1_{n ≡ residue (mod modulus)}`.
#[derive(Debug, Clone, Copy)]
pub struct ResidueMasked<'a, W: ?Sized> {
    pub inner: &'a W,
    pub modulus: u64,
    pub residue: u64,
}

impl<W: ArithmeticWeight + ?Sized> ArithmeticWeight for ResidueMasked<'_, W> {
    fn weight(&self, n: u64) -> i8 {
        if n % self.modulus == self.residue % self.modulus {
            self.inner.weight(n)
        } else {
            0
        }
    }

    fn range(&self) -> u64 {
        self.inner.range()
    }

    fn id(&self) -> String {
        format!("{}[n≡{} mod {}]", self.inner.id(), self.residue, self.modulus)
    }
}
