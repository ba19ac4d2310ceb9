//! Finitely supported integer vectors indexing Fourier modes of the torus.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Spatial Fourier mode index.
pub type ModeIndex = i64;

/// Japanese bracket `max(1, |j|)`.
pub fn bracket(j: ModeIndex) -> f64 {
    (j.unsigned_abs().max(1)) as f64
}

/// Sign label of a line or leaf: `Plus` is the amplitude, `Minus` its conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// Product of two signs.
    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Signs of the five lines entering a quintic node, relative to the node sign.
pub const QUINTIC_SIGNS: [Sign; 5] = [Sign::Plus, Sign::Minus, Sign::Plus, Sign::Minus, Sign::Plus];

type Entries = SmallVec<[(i64, i64); 8]>;

/// Sparse integer vector with canonical storage: strictly increasing indices, no zero entries.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct SparseMomentum {
    entries: Entries,
}

impl SparseMomentum {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Unit vector along mode `j`.
    pub fn basis(j: ModeIndex) -> Self {
        let mut entries = Entries::new();
        entries.push((j, 1));
        Self { entries }
    }

    /// Builds a canonical vector from arbitrary `(index, coefficient)` pairs; repeated indices add up.
    pub fn from_pairs<I: IntoIterator<Item = (i64, i64)>>(pairs: I) -> Self {
        let mut v: Vec<(i64, i64)> = pairs.into_iter().collect();
        v.sort_by_key(|p| p.0);
        let mut entries = Entries::new();
        for (i, c) in v {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => entries.push((i, c)),
            }
        }
        entries.retain(|e| e.1 != 0);
        Self { entries }
    }

    /// Signed sum of momenta.
    pub fn combine<'a, I: IntoIterator<Item = (Sign, &'a SparseMomentum)>>(terms: I) -> Self {
        let mut acc = Self::zero();
        for (s, m) in terms {
            acc = acc.add_signed(m, s);
        }
        acc
    }

    pub fn entries(&self) -> &[(i64, i64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: i64) -> i64 {
        match self.entries.binary_search_by_key(&i, |e| e.0) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0,
        }
    }

    /// `self + sign * other`, merged in one pass.
    pub fn add_signed(&self, other: &SparseMomentum, sign: Sign) -> SparseMomentum {
        let s = sign.value();
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Entries::with_capacity(a.len() + b.len());
        let (mut x, mut y) = (0, 0);
        while x < a.len() || y < b.len() {
            let ord = match (a.get(x), b.get(y)) {
                (Some(p), Some(q)) => p.0.cmp(&q.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push(a[x]);
                    x += 1;
                }
                Ordering::Greater => {
                    out.push((b[y].0, s * b[y].1));
                    y += 1;
                }
                Ordering::Equal => {
                    let c = a[x].1 + s * b[y].1;
                    if c != 0 {
                        out.push((a[x].0, c));
                    }
                    x += 1;
                    y += 1;
                }
            }
        }
        SparseMomentum { entries: out }
    }

    pub fn add(&self, other: &SparseMomentum) -> SparseMomentum {
        self.add_signed(other, Sign::Plus)
    }

    pub fn sub(&self, other: &SparseMomentum) -> SparseMomentum {
        self.add_signed(other, Sign::Minus)
    }

    pub fn neg(&self) -> SparseMomentum {
        SparseMomentum { entries: self.entries.iter().map(|&(i, c)| (i, -c)).collect() }
    }

    pub fn signed(&self, sign: Sign) -> SparseMomentum {
        match sign {
            Sign::Plus => self.clone(),
            Sign::Minus => self.neg(),
        }
    }

    /// The mode `sum_i i * nu_i` a coefficient with this momentum must sit on.
    pub fn pi(&self) -> i64 {
        self.entries.iter().map(|&(i, c)| i * c).sum()
    }

    /// Gauge charge `sum_i nu_i`.
    pub fn total_charge(&self) -> i64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// `sum_i <i>^mu |nu_i|`.
    pub fn weighted_norm(&self, mu: f64) -> f64 {
        self.entries.iter().map(|&(i, c)| bracket(i).powf(mu) * c.unsigned_abs() as f64).sum()
    }

    pub fn l1_norm(&self) -> i64 {
        self.entries.iter().map(|e| e.1.abs()).sum()
    }

    pub fn is_basis(&self, j: ModeIndex) -> bool {
        self.entries.len() == 1 && self.entries[0] == (j, 1)
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Text form `i:nu_i,i:nu_i,...`; the empty vector prints as an empty string.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(i, c)| format!("{i}:{c}")).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Debug for SparseMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_text())
    }
}

impl fmt::Display for SparseMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl PartialOrd for SparseMomentum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SparseMomentum {
    fn cmp(&self, other: &Self) -> Ordering {
        self.entries.as_slice().cmp(other.entries.as_slice())
    }
}

impl FromStr for SparseMomentum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::zero());
        }
        let mut pairs = Vec::new();
        for item in s.split(',') {
            let (i, c) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("momentum entry `{item}` lacks ':'")))?;
            let i: i64 = i.trim().parse().map_err(|_| Error::Parse(format!("bad index `{i}`")))?;
            let c: i64 = c.trim().parse().map_err(|_| Error::Parse(format!("bad coefficient `{c}`")))?;
            pairs.push((i, c));
        }
        let m = Self::from_pairs(pairs.iter().copied());
        let canonical = pairs.windows(2).all(|w| w[0].0 < w[1].0) && pairs.iter().all(|p| p.1 != 0);
        if !canonical {
            return Err(Error::Parse(format!("momentum `{s}` is not in canonical form")));
        }
        Ok(m)
    }
}

impl Serialize for SparseMomentum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<[i64; 2]> = self.entries.iter().map(|&(i, c)| [i, c]).collect();
        v.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseMomentum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<[i64; 2]> = Vec::deserialize(deserializer)?;
        Ok(Self::from_pairs(v.into_iter().map(|p| (p[0], p[1]))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(j: i64) -> SparseMomentum {
        SparseMomentum::basis(j)
    }

    #[test]
    fn basis_and_cancellation() {
        assert_eq!(e(-3).entries(), &[(-3, 1)]);
        assert!(e(2).sub(&e(2)).is_zero());
    }

    #[test]
    fn combine_examples() {
        let m = SparseMomentum::combine([(Sign::Plus, &e(1)), (Sign::Minus, &e(2)), (Sign::Plus, &e(1))]);
        assert_eq!(m.entries(), &[(1, 2), (2, -1)]);
        assert!(SparseMomentum::combine(std::iter::empty()).is_zero());
        assert!(SparseMomentum::combine([(Sign::Plus, &e(1)), (Sign::Minus, &e(1))]).is_zero());
    }

    #[test]
    fn projections() {
        let m = e(2).sub(&e(-1)).add(&e(3));
        assert_eq!(m.pi(), 6);
        assert_eq!(SparseMomentum::zero().pi(), 0);
        for j in -5..=5 {
            assert_eq!(e(j).pi(), j);
            assert_eq!(e(j).total_charge(), 1);
        }
        let q = SparseMomentum::from_pairs([(1, 1), (2, -1), (3, 1), (4, -1), (5, 1)]);
        assert_eq!(q.total_charge(), 1);
        assert_eq!(e(1).sub(&e(-1)).total_charge(), 0);
    }

    #[test]
    fn norms() {
        assert_eq!(e(0).weighted_norm(1.0), 1.0);
        assert_eq!(e(2).sub(&e(-1)).weighted_norm(0.0), 2.0);
        let m = SparseMomentum::from_pairs([(3, 2)]);
        assert!((m.weighted_norm(0.5) - 2.0 * 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn text_and_json_round_trip() {
        let m = SparseMomentum::from_pairs([(-2, 1), (0, -3), (4, 2)]);
        assert_eq!(m.to_text(), "-2:1,0:-3,4:2");
        assert_eq!(m.to_text().parse::<SparseMomentum>().unwrap(), m);
        let js = serde_json::to_string(&m).unwrap();
        assert_eq!(js, "[[-2,1],[0,-3],[4,2]]");
        assert_eq!(serde_json::from_str::<SparseMomentum>(&js).unwrap(), m);
        assert!("1:0".parse::<SparseMomentum>().is_err());
        assert!("2:1,1:1".parse::<SparseMomentum>().is_err());
    }
}
