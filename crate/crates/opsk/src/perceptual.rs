//! Perceptual vector space: thresholds, class codes, bit mapping, odor-set
//! quality, and odor-bank generation.
//!
//! Every odor carries a (pleasantness, intensity, edibility) vector on the
//! half-open scale `[0, 100)`. Splitting each dimension into `2^n` equal
//! intervals turns the cube into `2^(n_p+n_i+n_e)` regions; a symbol is the
//! region its odor's vector falls in.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::{scale_top, Error, Result, SCALE};

/// One perceptual dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Pleasantness,
    Intensity,
    Edibility,
}

/// Dimension order used everywhere: pleasantness, intensity, edibility.
pub const DIMENSIONS: [Dimension; 3] = [
    Dimension::Pleasantness,
    Dimension::Intensity,
    Dimension::Edibility,
];

/// An odor's (pleasantness, intensity, edibility) values; each in `[0, 100)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptualVector {
    pub p: f64,
    pub i: f64,
    pub e: f64,
}

impl PerceptualVector {
    pub fn new(p: f64, i: f64, e: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("i", i), ("e", e)] {
            if !v.is_finite() || !(0.0..SCALE).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "perceptual component {name}={v} outside [0, 100)"
                )));
            }
        }
        Ok(Self { p, i, e })
    }

    pub fn component(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Pleasantness => self.p,
            Dimension::Intensity => self.i,
            Dimension::Edibility => self.e,
        }
    }
}

/// Per-dimension bit counts `(n_p, n_i, n_e)`; `K = n_p + n_i + n_e`.
///
/// Each count is capped at 8 so a dimension holds at most 256 classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitAllocation {
    n_p: u32,
    n_i: u32,
    n_e: u32,
}

/// Implementation cap on bits per dimension.
pub const MAX_BITS_PER_DIMENSION: u32 = 8;

impl BitAllocation {
    pub fn new(n_p: u32, n_i: u32, n_e: u32) -> Result<Self> {
        for (name, n) in [("n_p", n_p), ("n_i", n_i), ("n_e", n_e)] {
            if n > MAX_BITS_PER_DIMENSION {
                return Err(Error::InvalidInput(format!(
                    "{name}={n} exceeds the per-dimension cap of {MAX_BITS_PER_DIMENSION}"
                )));
            }
        }
        if n_p + n_i + n_e == 0 {
            return Err(Error::InvalidInput(
                "bit allocation must carry at least one bit".into(),
            ));
        }
        Ok(Self { n_p, n_i, n_e })
    }

    pub fn n_p(&self) -> u32 {
        self.n_p
    }

    pub fn n_i(&self) -> u32 {
        self.n_i
    }

    pub fn n_e(&self) -> u32 {
        self.n_e
    }

    /// Bits carried by one dimension.
    pub fn bits(&self, dim: Dimension) -> u32 {
        match dim {
            Dimension::Pleasantness => self.n_p,
            Dimension::Intensity => self.n_i,
            Dimension::Edibility => self.n_e,
        }
    }

    /// Total bits per symbol.
    pub fn k(&self) -> u32 {
        self.n_p + self.n_i + self.n_e
    }

    /// Number of classes along one dimension (`2^n`).
    pub fn classes(&self, dim: Dimension) -> u16 {
        1u16 << self.bits(dim)
    }

    /// Total number of class codes (`2^K`).
    pub fn total_classes(&self) -> u32 {
        1u32 << self.k()
    }
}

impl fmt::Display for BitAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{},{})", self.k(), self.n_p, self.n_i, self.n_e)
    }
}

/// The `2^n - 1` equally spaced threshold values of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    values: Vec<f64>,
}

impl ThresholdSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds the threshold set `{k * 100 / 2^n : k = 1 .. 2^n - 1}` for a
/// dimension carrying `n` bits; empty for `n = 0`.
pub fn build_thresholds(n: u32) -> Result<ThresholdSet> {
    if n > MAX_BITS_PER_DIMENSION {
        return Err(Error::InvalidInput(format!(
            "threshold count for n={n} exceeds the cap of {MAX_BITS_PER_DIMENSION} bits"
        )));
    }
    let classes = 1u32 << n;
    let width = SCALE / classes as f64;
    let values = (1..classes).map(|k| k as f64 * width).collect();
    Ok(ThresholdSet { values })
}

/// Class indices per dimension identifying one region of perceptual space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassCode {
    pub p: u16,
    pub i: u16,
    pub e: u16,
}

impl ClassCode {
    pub fn new(p: u16, i: u16, e: u16) -> Self {
        Self { p, i, e }
    }

    pub fn index(&self, dim: Dimension) -> u16 {
        match dim {
            Dimension::Pleasantness => self.p,
            Dimension::Intensity => self.i,
            Dimension::Edibility => self.e,
        }
    }

    pub fn is_valid_under(&self, a: &BitAllocation) -> bool {
        DIMENSIONS.iter().all(|&d| self.index(d) < a.classes(d))
    }

    /// All class codes valid under `a`, in `(p, i, e)` lexicographic order.
    pub fn all(a: &BitAllocation) -> Vec<ClassCode> {
        let mut out = Vec::with_capacity(a.total_classes() as usize);
        for p in 0..a.classes(Dimension::Pleasantness) {
            for i in 0..a.classes(Dimension::Intensity) {
                for e in 0..a.classes(Dimension::Edibility) {
                    out.push(ClassCode::new(p, i, e));
                }
            }
        }
        out
    }
}

impl fmt::Display for ClassCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O({},{},{})", self.p, self.i, self.e)
    }
}

fn classify_component(value: f64, n: u32) -> u16 {
    let classes = 1u32 << n;
    let idx = (classes as f64 * value / SCALE).floor() as u32;
    idx.min(classes - 1) as u16
}

/// Maps a perceptual vector to its class code: `floor(2^n * v / 100)` per
/// dimension.
pub fn classify(v: &PerceptualVector, a: &BitAllocation) -> ClassCode {
    ClassCode::new(
        classify_component(v.p, a.n_p),
        classify_component(v.i, a.n_i),
        classify_component(v.e, a.n_e),
    )
}

/// Splits a `K`-bit group (most-significant bit first) into the per-dimension
/// class indices: the first `n_p` bits give the pleasantness class, the next
/// `n_i` the intensity class, the last `n_e` the edibility class.
pub fn bits_to_class(bits: &[bool], a: &BitAllocation) -> Result<ClassCode> {
    if bits.len() != a.k() as usize {
        return Err(Error::InvalidInput(format!(
            "bit group length {} does not match K={}",
            bits.len(),
            a.k()
        )));
    }
    let decimal = |seg: &[bool]| seg.iter().fold(0u16, |acc, &b| (acc << 1) | b as u16);
    let (p_bits, rest) = bits.split_at(a.n_p as usize);
    let (i_bits, e_bits) = rest.split_at(a.n_i as usize);
    Ok(ClassCode::new(
        decimal(p_bits),
        decimal(i_bits),
        decimal(e_bits),
    ))
}

/// Inverse of [`bits_to_class`]: fixed-width binary per dimension,
/// most-significant bit first.
pub fn class_to_bits(c: &ClassCode, a: &BitAllocation) -> Result<Vec<bool>> {
    if !c.is_valid_under(a) {
        return Err(Error::InvalidInput(format!(
            "class code {c} is not valid under allocation {a}"
        )));
    }
    let mut bits = Vec::with_capacity(a.k() as usize);
    for &dim in &DIMENSIONS {
        let n = a.bits(dim);
        let idx = c.index(dim);
        for shift in (0..n).rev() {
            bits.push((idx >> shift) & 1 == 1);
        }
    }
    Ok(bits)
}

/// Scores how close a dimension's odors sit to their optimal in-class
/// locations; 1 means every odor is optimal, 0 the worst permissible set.
///
/// `values[k]` is the perceptual value of the odor representing class `k`.
/// Optimal locations are the outer boundaries (0 and the scale top) for the
/// two outer classes and the interval midpoint for inner classes; each
/// class's distance from its optimum is normalized by the interval width and
/// the mean penalty is subtracted from 1.
pub fn quality_dimension(values: &[f64], n: u32) -> Result<f64> {
    if n < 1 || n > MAX_BITS_PER_DIMENSION {
        return Err(Error::InvalidInput(format!(
            "quality is defined for 1..={MAX_BITS_PER_DIMENSION} bits, got n={n}"
        )));
    }
    let classes = 1usize << n;
    if values.len() != classes {
        return Err(Error::InvalidInput(format!(
            "expected {classes} class values for n={n}, got {}",
            values.len()
        )));
    }
    let width = SCALE / classes as f64;
    let mut penalty_sum = 0.0;
    for (k, &v) in values.iter().enumerate() {
        let lower = k as f64 * width;
        let upper = (k + 1) as f64 * width;
        if !v.is_finite() || v < lower || v >= upper {
            return Err(Error::InvalidInput(format!(
                "class {k} value {v} outside its interval [{lower}, {upper})"
            )));
        }
        let penalty = if k == 0 {
            v / width
        } else if k == classes - 1 {
            // The domain top is one ulp below 100, so measure from there.
            (scale_top() - v).abs() / width
        } else {
            ((v - lower).abs() - (upper - v).abs()).abs() / width
        };
        penalty_sum += penalty;
    }
    Ok(1.0 - penalty_sum / classes as f64)
}

/// Opaque odor identity; orders deterministically for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OdorId(pub u32);

impl fmt::Display for OdorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "odor#{}", self.0)
    }
}

/// One capsule: an odor identity, its perceptual vector, and the mass left.
#[derive(Debug, Clone)]
pub struct Odor {
    pub id: OdorId,
    pub vector: PerceptualVector,
    remaining_mass: f64,
}

impl Odor {
    pub fn new(id: OdorId, vector: PerceptualVector, mass: f64) -> Result<Self> {
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::InvalidInput(format!(
                "capsule mass {mass} must be >= 0"
            )));
        }
        Ok(Self {
            id,
            vector,
            remaining_mass: mass,
        })
    }

    pub fn remaining_mass(&self) -> f64 {
        self.remaining_mass
    }
}

/// The transmitter's capsule store: one (initially) odor per class code.
///
/// Capsule lists grow past one odor only through adaptive re-initialization,
/// which merges classes. Masses only decrease after construction.
#[derive(Debug, Clone)]
pub struct OdorBank {
    allocation: BitAllocation,
    capsules: BTreeMap<ClassCode, Vec<Odor>>,
}

impl OdorBank {
    /// Assembles a bank from parts, checking that every class code valid
    /// under the allocation has at least one capsule and that every capsule
    /// classifies back to its key.
    pub fn from_parts(
        allocation: BitAllocation,
        capsules: BTreeMap<ClassCode, Vec<Odor>>,
    ) -> Result<Self> {
        for code in ClassCode::all(&allocation) {
            match capsules.get(&code) {
                Some(list) if !list.is_empty() => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "class {code} has no capsule under allocation {allocation}"
                    )))
                }
            }
        }
        for (code, list) in &capsules {
            if !code.is_valid_under(&allocation) {
                return Err(Error::InvalidInput(format!(
                    "capsule key {code} invalid under allocation {allocation}"
                )));
            }
            for odor in list {
                let actual = classify(&odor.vector, &allocation);
                if actual != *code {
                    return Err(Error::InvalidInput(format!(
                        "{} classifies to {actual} but is stored under {code}",
                        odor.id
                    )));
                }
            }
        }
        Ok(Self {
            allocation,
            capsules,
        })
    }

    pub fn allocation(&self) -> &BitAllocation {
        &self.allocation
    }

    pub fn capsules(&self) -> impl Iterator<Item = (&ClassCode, &[Odor])> {
        self.capsules.iter().map(|(c, v)| (c, v.as_slice()))
    }

    /// Consumes the bank, yielding its capsules (used by re-initialization).
    pub fn into_capsules(self) -> BTreeMap<ClassCode, Vec<Odor>> {
        self.capsules
    }

    /// The single odor of a class in a pre-update bank.
    pub fn single_odor(&self, code: &ClassCode) -> Result<&Odor> {
        let list = self
            .capsules
            .get(code)
            .ok_or_else(|| Error::InvalidInput(format!("no capsule for class {code}")))?;
        if list.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "class {code} holds {} odors; expected a pre-update bank",
                list.len()
            )));
        }
        Ok(&list[0])
    }

    /// The capsule the transmitter would draw from for `code`: largest
    /// remaining mass, ties broken by smallest odor id.
    pub fn best_capsule(&self, code: &ClassCode) -> Option<&Odor> {
        self.capsules.get(code)?.iter().max_by(|a, b| {
            a.remaining_mass
                .total_cmp(&b.remaining_mass)
                .then(b.id.cmp(&a.id))
        })
    }

    /// Total mass left across a class's capsules.
    pub fn remaining_mass(&self, code: &ClassCode) -> f64 {
        self.capsules
            .get(code)
            .map(|l| l.iter().map(|o| o.remaining_mass).sum())
            .unwrap_or(0.0)
    }

    /// Total mass left in the whole bank.
    pub fn total_remaining(&self) -> f64 {
        self.capsules
            .values()
            .flatten()
            .map(|o| o.remaining_mass)
            .sum()
    }

    /// The perceptual vector of an odor held anywhere in the bank.
    pub fn vector_of(&self, id: OdorId) -> Option<PerceptualVector> {
        self.capsules
            .values()
            .flatten()
            .find(|o| o.id == id)
            .map(|o| o.vector)
    }

    /// Releases up to `amount` from the class's best capsule. Returns the
    /// odor drawn and the mass actually released (less than `amount` only
    /// when the capsule is nearly empty).
    pub fn withdraw(&mut self, code: &ClassCode, amount: f64) -> Result<(OdorId, f64)> {
        let list = self
            .capsules
            .get_mut(code)
            .ok_or_else(|| Error::Depleted(format!("no capsule for class {code}")))?;
        let odor = list
            .iter_mut()
            .max_by(|a, b| {
                a.remaining_mass
                    .total_cmp(&b.remaining_mass)
                    .then(b.id.cmp(&a.id))
            })
            .ok_or_else(|| Error::Depleted(format!("class {code} is empty")))?;
        if odor.remaining_mass <= 0.0 {
            return Err(Error::Depleted(format!("class {code} has no mass left")));
        }
        let released = amount.min(odor.remaining_mass);
        odor.remaining_mass -= released;
        Ok((odor.id, released))
    }

    /// Releases up to `amount` from a specific odor (announcement releases).
    pub fn withdraw_from(&mut self, id: OdorId, amount: f64) -> Result<f64> {
        let odor = self
            .capsules
            .values_mut()
            .flatten()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::Depleted(format!("{id} not in bank")))?;
        if odor.remaining_mass <= 0.0 {
            return Err(Error::Depleted(format!("{id} has no mass left")));
        }
        let released = amount.min(odor.remaining_mass);
        odor.remaining_mass -= released;
        Ok(released)
    }

    /// Generates a pre-update bank whose overall quality is `target_q`.
    ///
    /// All dimensions are placed at their optimal locations, then the first
    /// information-carrying dimension is displaced uniformly (inner classes
    /// off-center by half the displacement, in a random direction) until the
    /// mean penalty equals `1 - target_q`, so the min over dimensions hits
    /// the target exactly.
    pub fn generate<R: Rng + ?Sized>(
        allocation: BitAllocation,
        target_q: f64,
        per_capsule_mass: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(target_q > 0.0 && target_q <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "target quality {target_q} outside (0, 1]"
            )));
        }
        if !(per_capsule_mass > 0.0) || !per_capsule_mass.is_finite() {
            return Err(Error::InvalidInput(format!(
                "per-capsule mass {per_capsule_mass} must be positive"
            )));
        }
        let perturbed = DIMENSIONS
            .iter()
            .copied()
            .find(|&d| allocation.bits(d) >= 1)
            .expect("allocation carries at least one bit");
        let delta = 1.0 - target_q;

        let mut positions: Vec<Vec<f64>> = Vec::with_capacity(3);
        for &dim in &DIMENSIONS {
            let n = allocation.bits(dim);
            let d = if dim == perturbed { delta } else { 0.0 };
            positions.push(dimension_positions(n, d, rng));
        }

        let mut capsules = BTreeMap::new();
        let mut next_id = 0u32;
        for code in ClassCode::all(&allocation) {
            let vector = PerceptualVector::new(
                positions[0][code.p as usize],
                positions[1][code.i as usize],
                positions[2][code.e as usize],
            )?;
            let odor = Odor::new(OdorId(next_id), vector, per_capsule_mass)?;
            next_id += 1;
            capsules.insert(code, vec![odor]);
        }
        let bank = Self::from_parts(allocation, capsules)?;
        debug_assert!((quality_overall(&bank)? - target_q).abs() <= 0.01);
        Ok(bank)
    }
}

/// Class-representative positions along one dimension: optimal locations
/// shifted by a uniform penalty `delta`.
fn dimension_positions<R: Rng + ?Sized>(n: u32, delta: f64, rng: &mut R) -> Vec<f64> {
    let classes = 1usize << n;
    if n == 0 {
        // No decisions along this dimension; any in-range value classifies
        // to the single class 0.
        return vec![SCALE / 2.0];
    }
    let width = SCALE / classes as f64;
    (0..classes)
        .map(|k| {
            if k == 0 {
                delta * width
            } else if k == classes - 1 {
                if delta == 0.0 {
                    scale_top()
                } else {
                    SCALE - delta * width
                }
            } else {
                let center = (k as f64 + 0.5) * width;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                center + sign * delta * width / 2.0
            }
        })
        .collect()
}

/// Overall odor-set quality: the minimum per-dimension quality over
/// dimensions that carry at least one bit.
///
/// Defined only for pre-update banks (one odor per class); all odors sharing
/// a class index along a dimension must agree on that component.
pub fn quality_overall(bank: &OdorBank) -> Result<f64> {
    let a = *bank.allocation();
    let mut q = f64::INFINITY;
    for &dim in &DIMENSIONS {
        let n = a.bits(dim);
        if n == 0 {
            continue;
        }
        let classes = a.classes(dim) as usize;
        let mut values = vec![f64::NAN; classes];
        for (code, list) in bank.capsules() {
            let odor = if list.len() == 1 {
                &list[0]
            } else {
                return Err(Error::InvalidInput(format!(
                    "quality is defined for pre-update banks; class {code} holds {} odors",
                    list.len()
                )));
            };
            let k = code.index(dim) as usize;
            let v = odor.vector.component(dim);
            if values[k].is_nan() {
                values[k] = v;
            } else if (values[k] - v).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "odors representing class {k} of {dim:?} disagree: {} vs {v}",
                    values[k]
                )));
            }
        }
        q = q.min(quality_dimension(&values, n)?);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn thresholds_match_equal_partition() {
        assert_eq!(build_thresholds(1).unwrap().values(), &[50.0]);
        assert_eq!(build_thresholds(2).unwrap().values(), &[25.0, 50.0, 75.0]);
        assert!(build_thresholds(0).unwrap().is_empty());
        assert!(build_thresholds(9).is_err());
    }

    #[test]
    fn classify_odor_bank_figure_vectors() {
        let a = BitAllocation::new(1, 1, 1).unwrap();
        let v = PerceptualVector::new(10.0, 15.0, 5.0).unwrap();
        assert_eq!(classify(&v, &a), ClassCode::new(0, 0, 0));
        let v = PerceptualVector::new(70.0, 25.0, 95.0).unwrap();
        assert_eq!(classify(&v, &a), ClassCode::new(1, 0, 1));
        let v = PerceptualVector::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(classify(&v, &a), ClassCode::new(0, 0, 0));
    }

    #[test]
    fn classify_at_threshold_and_top() {
        let a = BitAllocation::new(1, 0, 0).unwrap();
        let v = PerceptualVector::new(49.999, 0.0, 0.0).unwrap();
        assert_eq!(classify(&v, &a).p, 0);
        let v = PerceptualVector::new(50.0, 0.0, 0.0).unwrap();
        assert_eq!(classify(&v, &a).p, 1);
        // Top of the domain must land in the top class for every width.
        for n in 1..=8 {
            let a = BitAllocation::new(n, 0, 0).unwrap();
            let v = PerceptualVector::new(scale_top(), 0.0, 0.0).unwrap();
            assert_eq!(classify(&v, &a).p, (1 << n) - 1);
        }
    }

    #[test]
    fn classify_equals_threshold_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2_000 {
            let a = BitAllocation::new(
                rng.random_range(0..=4),
                rng.random_range(0..=4),
                rng.random_range(0..=4),
            );
            let a = match a {
                Ok(a) => a,
                Err(_) => continue, // K = 0 draw
            };
            let v = PerceptualVector::new(
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
            )
            .unwrap();
            let code = classify(&v, &a);
            for &dim in &DIMENSIONS {
                let thresholds = build_thresholds(a.bits(dim)).unwrap();
                let count = thresholds
                    .values()
                    .iter()
                    .filter(|&&t| t <= v.component(dim))
                    .count() as u16;
                assert_eq!(code.index(dim), count);
            }
        }
    }

    #[test]
    fn bit_mapping_examples() {
        let a = BitAllocation::new(1, 1, 1).unwrap();
        let code = bits_to_class(&[true, false, true], &a).unwrap();
        assert_eq!(code, ClassCode::new(1, 0, 1));
        assert_eq!(class_to_bits(&code, &a).unwrap(), vec![true, false, true]);

        let a = BitAllocation::new(2, 2, 1).unwrap();
        let code = bits_to_class(&[true, true, false, true, false], &a).unwrap();
        assert_eq!(code, ClassCode::new(3, 1, 0));
        assert_eq!(
            class_to_bits(&ClassCode::new(3, 1, 0), &a).unwrap(),
            vec![true, true, false, true, false]
        );

        let a = BitAllocation::new(1, 1, 1).unwrap();
        assert_eq!(
            bits_to_class(&[false, false, false], &a).unwrap(),
            ClassCode::new(0, 0, 0)
        );
        assert!(bits_to_class(&[false, false], &a).is_err());
        assert!(class_to_bits(&ClassCode::new(2, 0, 0), &a).is_err());
    }

    #[test]
    fn bit_mapping_round_trips_exhaustively() {
        for (n_p, n_i, n_e) in [(1, 1, 1), (2, 2, 1), (3, 1, 1), (2, 3, 3), (8, 0, 0)] {
            let a = BitAllocation::new(n_p, n_i, n_e).unwrap();
            let k = a.k();
            for value in 0u32..(1 << k) {
                let bits: Vec<bool> = (0..k).rev().map(|s| (value >> s) & 1 == 1).collect();
                let code = bits_to_class(&bits, &a).unwrap();
                assert!(code.is_valid_under(&a));
                assert_eq!(class_to_bits(&code, &a).unwrap(), bits);
            }
        }
    }

    #[test]
    fn quality_dimension_hand_values() {
        // Both odors at their optimal boundary locations.
        assert_eq!(quality_dimension(&[0.0, scale_top()], 1).unwrap(), 1.0);
        // Centered odors for n=1 are half a width from each boundary.
        let q = quality_dimension(&[25.0, 75.0], 1).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
        // An equidistant inner odor contributes no penalty.
        let q = quality_dimension(&[0.0, 37.5, 62.5, scale_top()], 2).unwrap();
        assert_eq!(q, 1.0);
    }

    #[test]
    fn quality_is_one_only_at_the_optima() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in 1..=3u32 {
            let classes = 1usize << n;
            let width = SCALE / classes as f64;
            let optimal: Vec<f64> = (0..classes)
                .map(|k| {
                    if k == 0 {
                        0.0
                    } else if k == classes - 1 {
                        scale_top()
                    } else {
                        (k as f64 + 0.5) * width
                    }
                })
                .collect();
            assert_eq!(quality_dimension(&optimal, n).unwrap(), 1.0);
            // Nudging any single class off its optimum costs quality.
            for k in 0..classes {
                let mut values = optimal.clone();
                let nudge = rng.random_range(0.05..0.4) * width;
                values[k] = if k == classes - 1 {
                    values[k] - nudge
                } else {
                    values[k] + nudge
                };
                let q = quality_dimension(&values, n).unwrap();
                assert!(q < 1.0, "n={n} class {k}: {q}");
            }
        }
    }

    #[test]
    fn quality_dimension_rejects_bad_input() {
        assert!(quality_dimension(&[0.0, 60.0, 99.0], 2).is_err()); // wrong length
        assert!(quality_dimension(&[60.0, 99.0], 1).is_err()); // class 0 value out of interval
        assert!(quality_dimension(&[0.0, 99.0], 0).is_err()); // n = 0 has no quality
    }

    #[test]
    fn quality_dimension_reflection_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4u32 {
            let classes = 1usize << n;
            let width = SCALE / classes as f64;
            for _ in 0..200 {
                let values: Vec<f64> = (0..classes)
                    .map(|k| k as f64 * width + rng.random_range(0.01..0.99) * width)
                    .collect();
                let reflected: Vec<f64> = (0..classes)
                    .map(|k| SCALE - values[classes - 1 - k])
                    .collect();
                let q = quality_dimension(&values, n).unwrap();
                let qr = quality_dimension(&reflected, n).unwrap();
                assert!((q - qr).abs() < 1e-9, "n={n} q={q} qr={qr}");
            }
        }
    }

    #[test]
    fn quality_overall_takes_min_and_skips_empty_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = BitAllocation::new(1, 1, 1).unwrap();
        let bank = OdorBank::generate(a, 0.7, 1.0, &mut rng).unwrap();
        let q = quality_overall(&bank).unwrap();
        assert!((q - 0.7).abs() <= 0.01);

        let a = BitAllocation::new(1, 0, 0).unwrap();
        let bank = OdorBank::generate(a, 0.4, 1.0, &mut rng).unwrap();
        let q = quality_overall(&bank).unwrap();
        assert!((q - 0.4).abs() <= 0.01);
    }

    #[test]
    fn generate_hits_quality_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(n_p, n_i, n_e) in &[(1, 1, 1), (2, 1, 1), (2, 2, 1), (3, 1, 1)] {
            let a = BitAllocation::new(n_p, n_i, n_e).unwrap();
            for target in [1.0, 0.5, 0.1, 0.93] {
                let bank = OdorBank::generate(a, target, 2.4e-9, &mut rng).unwrap();
                let q = quality_overall(&bank).unwrap();
                assert!(
                    (q - target).abs() <= 0.01,
                    "allocation {a} target {target} got {q}"
                );
                // Every capsule classifies back to its key (bank invariant).
                for (code, list) in bank.capsules() {
                    assert_eq!(list.len(), 1);
                    assert_eq!(classify(&list[0].vector, &a), *code);
                }
            }
        }
    }

    #[test]
    fn generate_rejects_bad_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = BitAllocation::new(1, 1, 1).unwrap();
        assert!(OdorBank::generate(a, 0.0, 1.0, &mut rng).is_err());
        assert!(OdorBank::generate(a, 1.1, 1.0, &mut rng).is_err());
        assert!(OdorBank::generate(a, 0.5, 0.0, &mut rng).is_err());
    }

    #[test]
    fn withdraw_prefers_largest_capsule_and_depletes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = BitAllocation::new(1, 0, 0).unwrap();
        let mut bank = OdorBank::generate(a, 1.0, 3.0, &mut rng).unwrap();
        let code = ClassCode::new(0, 0, 0);
        let (id, got) = bank.withdraw(&code, 1.0).unwrap();
        assert_eq!(got, 1.0);
        assert_eq!(bank.remaining_mass(&code), 2.0);
        // Partial release when nearly empty.
        let (_, got) = bank.withdraw(&code, 5.0).unwrap();
        assert_eq!(got, 2.0);
        assert!(bank.withdraw(&code, 1.0).is_err());
        assert!(bank.vector_of(id).is_some());
    }
}
