//! Exact finite laws with 128-bit rational probabilities.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::lattice::OrientedEdge;

pub type Rational = Ratio<i128>;

/// Rational serialized as decimal strings, so 128-bit parts survive JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalExport {
    pub num: String,
    pub den: String,
}

impl From<&Rational> for RationalExport {
    fn from(r: &Rational) -> Self {
        RationalExport {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl TryFrom<&RationalExport> for Rational {
    type Error = crate::Error;

    fn try_from(r: &RationalExport) -> crate::Result<Self> {
        let bad = || crate::Error::InvalidArgument(format!("bad rational {}/{}", r.num, r.den));
        let num: i128 = r.num.parse().map_err(|_| bad())?;
        let den: i128 = r.den.parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        Ok(Rational::new(num, den))
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Numerators over a shared denominator; the map never holds zeros.
#[derive(Debug, Clone)]
struct Weights<K: Ord> {
    den: i128,
    num: BTreeMap<K, i128>,
}

impl<K: Ord + Clone> Weights<K> {
    fn from_counts<I: IntoIterator<Item = (K, u64)>>(counts: I, total: u64) -> Self {
        let mut num = BTreeMap::new();
        for (k, c) in counts {
            if c > 0 {
                *num.entry(k).or_insert(0) += c as i128;
            }
        }
        Weights {
            den: total as i128,
            num,
        }
    }

    fn from_ratios<I: IntoIterator<Item = (K, Rational)>>(atoms: I) -> Self {
        let atoms: Vec<(K, Rational)> = atoms.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        let den = atoms.iter().fold(1i128, |l, (_, p)| l / gcd(l, *p.denom()) * p.denom());
        let mut num = BTreeMap::new();
        for (k, p) in atoms {
            *num.entry(k).or_insert(0) += p.numer() * (den / p.denom());
        }
        num.retain(|_, n| *n != 0);
        Weights { den, num }
    }

    fn prob(&self, k: &K) -> Rational {
        Rational::new(self.num.get(k).copied().unwrap_or(0), self.den)
    }

    fn total(&self) -> Rational {
        Rational::new(self.num.values().sum(), self.den)
    }

    fn sum_where<F: Fn(&K) -> bool>(&self, pred: F) -> Rational {
        Rational::new(self.num.iter().filter(|(k, _)| pred(k)).map(|(_, n)| n).sum(), self.den)
    }

    fn map_keys<J: Ord + Clone, F: Fn(&K) -> J>(&self, f: F) -> Weights<J> {
        let mut num = BTreeMap::new();
        for (k, n) in &self.num {
            *num.entry(f(k)).or_insert(0) += n;
        }
        num.retain(|_, n| *n != 0);
        Weights { den: self.den, num }
    }

    /// Half the L1 distance.
    fn tv(&self, other: &Self) -> Rational {
        let (da, db) = (self.den, other.den);
        let mut sum: i128 = 0;
        for (k, &a) in &self.num {
            let b = other.num.get(k).copied().unwrap_or(0);
            sum += (a * db - b * da).abs();
        }
        for (k, &b) in &other.num {
            if !self.num.contains_key(k) {
                sum += (b * da).abs();
            }
        }
        Rational::new(sum, 2 * da * db)
    }

    fn ratios(&self) -> impl Iterator<Item = (&K, Rational)> + '_ {
        self.num.iter().map(move |(k, &n)| (k, Rational::new(n, self.den)))
    }
}

impl<K: Ord> PartialEq for Weights<K> {
    fn eq(&self, other: &Self) -> bool {
        self.num.len() == other.num.len()
            && self
                .num
                .iter()
                .zip(&other.num)
                .all(|((ka, a), (kb, b))| ka == kb && a * other.den == b * self.den)
    }
}

impl<K: Ord> Eq for Weights<K> {}

/// Law of an integer-valued random variable with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDist {
    w: Weights<i64>,
}

impl Default for ExactDist {
    fn default() -> Self {
        ExactDist {
            w: Weights {
                den: 1,
                num: BTreeMap::new(),
            },
        }
    }
}

impl ExactDist {
    /// Law with `count / total` on each value. Zero counts are dropped.
    pub fn from_counts<I: IntoIterator<Item = (i64, u64)>>(counts: I, total: u64) -> Self {
        ExactDist {
            w: Weights::from_counts(counts, total),
        }
    }

    pub fn from_atoms<I: IntoIterator<Item = (i64, Rational)>>(atoms: I) -> Self {
        ExactDist {
            w: Weights::from_ratios(atoms),
        }
    }

    pub fn point(value: i64) -> Self {
        ExactDist::from_counts([(value, 1)], 1)
    }

    pub fn prob(&self, value: i64) -> Rational {
        self.w.prob(&value)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (i64, Rational)> + '_ {
        self.w.ratios().map(|(&v, p)| (v, p))
    }

    pub fn len(&self) -> usize {
        self.w.num.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.num.is_empty()
    }

    pub fn total(&self) -> Rational {
        self.w.total()
    }

    /// `Pr[|X| > c]`.
    pub fn tail(&self, c: i64) -> Rational {
        self.w.sum_where(|v| v.abs() > c)
    }

    /// `Pr[|X| <= c]`.
    pub fn within(&self, c: i64) -> Rational {
        self.w.sum_where(|v| v.abs() <= c)
    }

    pub fn max_abs(&self) -> i64 {
        self.w.num.keys().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn to_export(&self) -> LawExport {
        LawExport {
            atoms: self
                .atoms()
                .map(|(value, p)| AtomExport {
                    value,
                    prob: (&p).into(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for ExactDist {
    /// `{-8: 1/9, +1: 8/9}`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, p)) in self.atoms().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v:+}: {p}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomExport {
    pub value: i64,
    #[serde(flatten)]
    pub prob: RationalExport,
}

/// JSON shape `{atoms: [{value, num, den}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawExport {
    pub atoms: Vec<AtomExport>,
}

impl TryFrom<&LawExport> for ExactDist {
    type Error = crate::Error;

    fn try_from(l: &LawExport) -> crate::Result<Self> {
        let atoms = l
            .atoms
            .iter()
            .map(|a| Ok((a.value, Rational::try_from(&a.prob)?)))
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(ExactDist::from_atoms(atoms))
    }
}

/// Joint law of the field values on a finite list of oriented edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowLaw {
    edges: Vec<OrientedEdge>,
    w: Weights<Vec<i64>>,
}

impl WindowLaw {
    pub fn from_counts<I: IntoIterator<Item = (Vec<i64>, u64)>>(
        edges: Vec<OrientedEdge>,
        counts: I,
        total: u64,
    ) -> Self {
        let w = Weights::from_counts(counts, total);
        debug_assert!(w.num.keys().all(|k| k.len() == edges.len()));
        WindowLaw { edges, w }
    }

    pub fn edges(&self) -> &[OrientedEdge] {
        &self.edges
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[i64], Rational)> + '_ {
        self.w.ratios().map(|(v, p)| (v.as_slice(), p))
    }

    pub fn prob(&self, values: &[i64]) -> Rational {
        self.w.prob(&values.to_vec())
    }

    pub fn support_len(&self) -> usize {
        self.w.num.len()
    }

    pub fn total(&self) -> Rational {
        self.w.total()
    }

    pub fn marginal(&self, i: usize) -> ExactDist {
        self.push_forward(|vals| vals[i])
    }

    /// Law of `f(values)`.
    pub fn push_forward<F: Fn(&[i64]) -> i64>(&self, f: F) -> ExactDist {
        ExactDist {
            w: self.w.map_keys(|k| f(k)),
        }
    }

    /// Half the L1 distance between the atom maps. Windows are not compared.
    pub(crate) fn tv_unchecked(&self, other: &WindowLaw) -> Rational {
        self.w.tv(&other.w)
    }

    pub fn to_export(&self) -> WindowLawExport {
        WindowLawExport {
            edges: self
                .edges
                .iter()
                .map(|e| format!("{},{},{}", e.tail.x, e.tail.y, e.dir.symbol()))
                .collect(),
            atoms: self
                .atoms()
                .map(|(values, p)| WindowAtomExport {
                    values: values.to_vec(),
                    prob: (&p).into(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowAtomExport {
    pub values: Vec<i64>,
    #[serde(flatten)]
    pub prob: RationalExport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLawExport {
    pub edges: Vec<String>,
    pub atoms: Vec<WindowAtomExport>,
}
