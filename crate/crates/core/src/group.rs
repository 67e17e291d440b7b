//! The seventeen wallpaper groups, their symmetry profiles in the twelve-feature
//! basis, the subgroup hierarchy, and the concrete lattice geometry and point
//! operations the generator uses for each group.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::isometry::{cross, det, dot, inverse, mat_mul, mat_vec, norm, Mat2, Vec2};
use crate::lattice::LatticeBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum WallpaperGroup {
    P1,
    P2,
    PM,
    PG,
    CM,
    PMM,
    PMG,
    PGG,
    CMM,
    P4,
    P4M,
    P4G,
    P3,
    P3M1,
    P31M,
    P6,
    P6M,
}

pub const NUM_GROUPS: usize = 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeClass {
    Oblique,
    Rectangular,
    CenteredRectangular,
    Square,
    Hexagonal,
}

impl WallpaperGroup {
    pub const ALL: [WallpaperGroup; NUM_GROUPS] = [
        Self::P1,
        Self::P2,
        Self::PM,
        Self::PG,
        Self::CM,
        Self::PMM,
        Self::PMG,
        Self::PGG,
        Self::CMM,
        Self::P4,
        Self::P4M,
        Self::P4G,
        Self::P3,
        Self::P3M1,
        Self::P31M,
        Self::P6,
        Self::P6M,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P1 => "P1",
            Self::P2 => "P2",
            Self::PM => "PM",
            Self::PG => "PG",
            Self::CM => "CM",
            Self::PMM => "PMM",
            Self::PMG => "PMG",
            Self::PGG => "PGG",
            Self::CMM => "CMM",
            Self::P4 => "P4",
            Self::P4M => "P4M",
            Self::P4G => "P4G",
            Self::P3 => "P3",
            Self::P3M1 => "P3M1",
            Self::P31M => "P31M",
            Self::P6 => "P6",
            Self::P6M => "P6M",
        }
    }

    pub fn lattice_class(self) -> LatticeClass {
        use WallpaperGroup::*;
        match self {
            P1 | P2 => LatticeClass::Oblique,
            PM | PG | PMM | PMG | PGG => LatticeClass::Rectangular,
            CM | CMM => LatticeClass::CenteredRectangular,
            P4 | P4M | P4G => LatticeClass::Square,
            P3 | P3M1 | P31M | P6 | P6M => LatticeClass::Hexagonal,
        }
    }

    /// Largest `n` such that the group contains an `n`-fold rotation.
    pub fn rotation_order(self) -> u32 {
        use WallpaperGroup::*;
        match self {
            P1 | PM | PG | CM => 1,
            P2 | PMM | PMG | PGG | CMM => 2,
            P3 | P3M1 | P31M => 3,
            P4 | P4M | P4G => 4,
            P6 | P6M => 6,
        }
    }
}

impl fmt::Display for WallpaperGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WallpaperGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.name() == up)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown wallpaper group {s:?}")))
    }
}

impl From<WallpaperGroup> for String {
    fn from(g: WallpaperGroup) -> String {
        g.name().to_string()
    }
}

impl TryFrom<String> for WallpaperGroup {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

/// Lattice direction along which a reflection or glide axis runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    T1,
    T2,
    D1,
    D2,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::T1, Axis::T2, Axis::D1, Axis::D2];

    pub fn vector(self, basis: &LatticeBasis) -> Vec2 {
        match self {
            Axis::T1 => basis.t1,
            Axis::T2 => basis.t2,
            Axis::D1 => basis.d1(),
            Axis::D2 => basis.d2(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymmetryKind {
    Rotation(u32),
    Reflection(Axis),
    Glide(Axis),
}

/// The twelve candidate symmetries scored by the U-Method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symmetry {
    R2,
    R3,
    R4,
    R6,
    RefT1,
    RefT2,
    RefD1,
    RefD2,
    GlideT1,
    GlideT2,
    GlideD1,
    GlideD2,
}

pub const NUM_SYMMETRIES: usize = 12;

impl Symmetry {
    pub const ALL: [Symmetry; NUM_SYMMETRIES] = [
        Self::R2,
        Self::R3,
        Self::R4,
        Self::R6,
        Self::RefT1,
        Self::RefT2,
        Self::RefD1,
        Self::RefD2,
        Self::GlideT1,
        Self::GlideT2,
        Self::GlideD1,
        Self::GlideD2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::R2 => "R2",
            Self::R3 => "R3",
            Self::R4 => "R4",
            Self::R6 => "R6",
            Self::RefT1 => "Ref_T1",
            Self::RefT2 => "Ref_T2",
            Self::RefD1 => "Ref_D1",
            Self::RefD2 => "Ref_D2",
            Self::GlideT1 => "Glide_T1",
            Self::GlideT2 => "Glide_T2",
            Self::GlideD1 => "Glide_D1",
            Self::GlideD2 => "Glide_D2",
        }
    }

    pub fn kind(self) -> SymmetryKind {
        use Symmetry::*;
        match self {
            R2 => SymmetryKind::Rotation(2),
            R3 => SymmetryKind::Rotation(3),
            R4 => SymmetryKind::Rotation(4),
            R6 => SymmetryKind::Rotation(6),
            RefT1 => SymmetryKind::Reflection(Axis::T1),
            RefT2 => SymmetryKind::Reflection(Axis::T2),
            RefD1 => SymmetryKind::Reflection(Axis::D1),
            RefD2 => SymmetryKind::Reflection(Axis::D2),
            GlideT1 => SymmetryKind::Glide(Axis::T1),
            GlideT2 => SymmetryKind::Glide(Axis::T2),
            GlideD1 => SymmetryKind::Glide(Axis::D1),
            GlideD2 => SymmetryKind::Glide(Axis::D2),
        }
    }

    pub fn reflection(axis: Axis) -> Symmetry {
        match axis {
            Axis::T1 => Self::RefT1,
            Axis::T2 => Self::RefT2,
            Axis::D1 => Self::RefD1,
            Axis::D2 => Self::RefD2,
        }
    }

    pub fn glide(axis: Axis) -> Symmetry {
        match axis {
            Axis::T1 => Self::GlideT1,
            Axis::T2 => Self::GlideT2,
            Axis::D1 => Self::GlideD1,
            Axis::D2 => Self::GlideD2,
        }
    }

    pub fn rotation(order: u32) -> Option<Symmetry> {
        match order {
            2 => Some(Self::R2),
            3 => Some(Self::R3),
            4 => Some(Self::R4),
            6 => Some(Self::R6),
            _ => None,
        }
    }

    /// The pure reflection sharing this glide's axis.
    pub fn colinear_reflection(self) -> Option<Symmetry> {
        match self.kind() {
            SymmetryKind::Glide(a) => Some(Self::reflection(a)),
            _ => None,
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of symmetries over the twelve-feature basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SymmetryProfile(u16);

impl SymmetryProfile {
    pub const EMPTY: SymmetryProfile = SymmetryProfile(0);

    pub fn of(syms: &[Symmetry]) -> Self {
        syms.iter().fold(Self::EMPTY, |p, s| p.with(*s))
    }

    pub fn with(self, s: Symmetry) -> Self {
        SymmetryProfile(self.0 | (1 << s.index()))
    }

    pub fn contains(self, s: Symmetry) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn is_subset_of(self, other: SymmetryProfile) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Symmetry> {
        Symmetry::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    pub fn as_bools(self) -> [bool; NUM_SYMMETRIES] {
        let mut out = [false; NUM_SYMMETRIES];
        for s in self.iter() {
            out[s.index()] = true;
        }
        out
    }

    /// R6 ⇒ R3 and R2; R4 ⇒ R2.
    pub fn is_rotation_closed(self) -> bool {
        let r6 = !self.contains(Symmetry::R6)
            || (self.contains(Symmetry::R3) && self.contains(Symmetry::R2));
        let r4 = !self.contains(Symmetry::R4) || self.contains(Symmetry::R2);
        r6 && r4
    }

    fn map_axes(self, f: impl Fn(Axis) -> Axis) -> Self {
        self.iter().fold(Self::EMPTY, |p, s| {
            p.with(match s.kind() {
                SymmetryKind::Rotation(_) => s,
                SymmetryKind::Reflection(a) => Symmetry::reflection(f(a)),
                SymmetryKind::Glide(a) => Symmetry::glide(f(a)),
            })
        })
    }

    /// Relabels T1 ↔ T2 (same lattice, basis vectors listed in the other order).
    pub fn swap_translations(self) -> Self {
        self.map_axes(|a| match a {
            Axis::T1 => Axis::T2,
            Axis::T2 => Axis::T1,
            d => d,
        })
    }

    /// Relabels D1 ↔ D2 (same lattice, second basis vector negated).
    pub fn swap_diagonals(self) -> Self {
        self.map_axes(|a| match a {
            Axis::D1 => Axis::D2,
            Axis::D2 => Axis::D1,
            t => t,
        })
    }

    pub fn has_reflection(self) -> bool {
        self.iter()
            .any(|s| matches!(s.kind(), SymmetryKind::Reflection(_)))
    }

    pub fn has_glide(self) -> bool {
        self.iter().any(|s| matches!(s.kind(), SymmetryKind::Glide(_)))
    }
}

/// Symmetries that define `g`, expressed in the generator's lattice basis for `g`.
pub fn defining_profile(g: WallpaperGroup) -> SymmetryProfile {
    use Symmetry::*;
    use WallpaperGroup as G;
    let syms: &[Symmetry] = match g {
        G::P1 => &[],
        G::P2 => &[R2],
        G::PM => &[RefT1],
        G::PG => &[GlideT1],
        G::CM => &[RefD1],
        G::PMM => &[R2, RefT1, RefT2],
        G::PMG => &[R2, RefT2, GlideT1],
        G::PGG => &[R2, GlideT1, GlideT2],
        G::CMM => &[R2, RefD1, RefD2],
        G::P4 => &[R2, R4],
        G::P4M => &[R2, R4, RefT1, RefT2, RefD1, RefD2],
        G::P4G => &[R2, R4, RefD1, RefD2, GlideT1, GlideT2],
        G::P3 => &[R3],
        G::P3M1 => &[R3, RefD1],
        G::P31M => &[R3, RefT1, RefT2, RefD2],
        G::P6 => &[R2, R3, R6],
        G::P6M => &[R2, R3, R6, RefT1, RefT2, RefD1, RefD2],
    };
    SymmetryProfile::of(syms)
}

/// Defining profiles under the basis relabelings a lattice estimate can produce
/// (T1 ↔ T2 for rectangular lattices, D1 ↔ D2 for rhombic ones).
pub fn profile_variants(g: WallpaperGroup) -> Vec<SymmetryProfile> {
    let base = defining_profile(g);
    let alt = match g.lattice_class() {
        LatticeClass::Rectangular => Some(base.swap_translations()),
        LatticeClass::CenteredRectangular => Some(base.swap_diagonals()),
        _ => None,
    };
    match alt {
        Some(a) if a != base => vec![base, a],
        _ => vec![base],
    }
}

// ---------------------------------------------------------------------------
// Generator geometry
// ---------------------------------------------------------------------------

/// Point operation `u -> M u + beta` in fractional lattice coordinates, with
/// `beta = beta_half / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FracOp {
    pub m: [[i32; 2]; 2],
    pub beta_half: [i32; 2],
}

impl FracOp {
    const fn new(m: [[i32; 2]; 2], beta_half: [i32; 2]) -> Self {
        Self { m, beta_half }
    }

    pub fn beta(&self) -> Vec2 {
        [self.beta_half[0] as f64 / 2.0, self.beta_half[1] as f64 / 2.0]
    }

    pub fn m_f64(&self) -> Mat2 {
        [
            [self.m[0][0] as f64, self.m[0][1] as f64],
            [self.m[1][0] as f64, self.m[1][1] as f64],
        ]
    }

    fn then(&self, other: &FracOp) -> FracOp {
        // other ∘ self
        let m = [
            [
                other.m[0][0] * self.m[0][0] + other.m[0][1] * self.m[1][0],
                other.m[0][0] * self.m[0][1] + other.m[0][1] * self.m[1][1],
            ],
            [
                other.m[1][0] * self.m[0][0] + other.m[1][1] * self.m[1][0],
                other.m[1][0] * self.m[0][1] + other.m[1][1] * self.m[1][1],
            ],
        ];
        let b = [
            other.m[0][0] * self.beta_half[0] + other.m[0][1] * self.beta_half[1] + other.beta_half[0],
            other.m[1][0] * self.beta_half[0] + other.m[1][1] * self.beta_half[1] + other.beta_half[1],
        ];
        FracOp::new(m, [b[0].rem_euclid(2), b[1].rem_euclid(2)])
    }
}

const ID: [[i32; 2]; 2] = [[1, 0], [0, 1]];
const NEG: [[i32; 2]; 2] = [[-1, 0], [0, -1]];
const FLIP_Y: [[i32; 2]; 2] = [[1, 0], [0, -1]];
const FLIP_X: [[i32; 2]; 2] = [[-1, 0], [0, 1]];
const SWAP: [[i32; 2]; 2] = [[0, 1], [1, 0]];
const NEG_SWAP: [[i32; 2]; 2] = [[0, -1], [-1, 0]];
const ROT90: [[i32; 2]; 2] = [[0, -1], [1, 0]];
// hexagonal basis t1 = (a, 0), t2 = (a/2, a√3/2)
const HEX_ROT60: [[i32; 2]; 2] = [[0, -1], [1, 1]];
const HEX_MIRROR_X: [[i32; 2]; 2] = [[1, 1], [0, -1]];

fn powers(gen: FracOp, n: usize) -> Vec<FracOp> {
    let mut out = vec![FracOp::new(ID, [0, 0])];
    for _ in 1..n {
        let last = *out.last().unwrap();
        out.push(last.then(&gen));
    }
    out
}

fn with_coset(rots: &[FracOp], mirror: FracOp) -> Vec<FracOp> {
    let mut out = rots.to_vec();
    out.extend(rots.iter().map(|r| mirror.then(r)));
    out
}

/// Coset representatives (point group with their translation parts) the generator
/// symmetrizes over, in the fractional coordinates of [`generator_lattice`].
pub fn point_operations(g: WallpaperGroup) -> Vec<FracOp> {
    use WallpaperGroup as G;
    let op = FracOp::new;
    let id = op(ID, [0, 0]);
    match g {
        G::P1 => vec![id],
        G::P2 => vec![id, op(NEG, [0, 0])],
        G::PM => vec![id, op(FLIP_Y, [0, 0])],
        G::PG => vec![id, op(FLIP_Y, [1, 0])],
        G::CM => vec![id, op(SWAP, [0, 0])],
        G::PMM => vec![id, op(NEG, [0, 0]), op(FLIP_Y, [0, 0]), op(FLIP_X, [0, 0])],
        G::PMG => vec![id, op(NEG, [0, 0]), op(FLIP_X, [1, 0]), op(FLIP_Y, [1, 0])],
        G::PGG => vec![id, op(NEG, [0, 0]), op(FLIP_X, [1, 1]), op(FLIP_Y, [1, 1])],
        G::CMM => vec![id, op(NEG, [0, 0]), op(SWAP, [0, 0]), op(NEG_SWAP, [0, 0])],
        G::P4 => powers(op(ROT90, [0, 0]), 4),
        G::P4M => with_coset(&powers(op(ROT90, [0, 0]), 4), op(FLIP_Y, [0, 0])),
        G::P4G => with_coset(&powers(op(ROT90, [0, 0]), 4), op(FLIP_X, [1, 1])),
        G::P3 => powers(op(HEX_ROT60, [0, 0]).then(&op(HEX_ROT60, [0, 0])), 3),
        G::P3M1 => {
            let r120 = op(HEX_ROT60, [0, 0]).then(&op(HEX_ROT60, [0, 0]));
            // mirror at 30°: R60 ∘ Mx
            let m30 = op(HEX_MIRROR_X, [0, 0]).then(&op(HEX_ROT60, [0, 0]));
            with_coset(&powers(r120, 3), m30)
        }
        G::P31M => {
            let r120 = op(HEX_ROT60, [0, 0]).then(&op(HEX_ROT60, [0, 0]));
            with_coset(&powers(r120, 3), op(HEX_MIRROR_X, [0, 0]))
        }
        G::P6 => powers(op(HEX_ROT60, [0, 0]), 6),
        G::P6M => with_coset(&powers(op(HEX_ROT60, [0, 0]), 6), op(HEX_MIRROR_X, [0, 0])),
    }
}

const RECT_ASPECT: f64 = 1.3;
const RHOMB_ASPECT: f64 = 0.7;

/// Lattice basis the generator uses for `g`, scaled so the primitive cell has
/// area `lattice_size²`.
pub fn generator_lattice(g: WallpaperGroup, lattice_size: f64) -> LatticeBasis {
    let l = lattice_size;
    let (t1, t2) = match g.lattice_class() {
        // (32, 0), (8, 32) at the default size: oblique, reduced, area l².
        LatticeClass::Oblique => ([l, 0.0], [l / 4.0, l]),
        LatticeClass::Rectangular => {
            let a = l / RECT_ASPECT.sqrt();
            ([a, 0.0], [0.0, a * RECT_ASPECT])
        }
        LatticeClass::CenteredRectangular => {
            // conventional cell p x q with p q / 2 = l²
            let p = (2.0 * l * l / RHOMB_ASPECT).sqrt();
            let q = p * RHOMB_ASPECT;
            ([p / 2.0, q / 2.0], [p / 2.0, -q / 2.0])
        }
        LatticeClass::Square => ([l, 0.0], [0.0, l]),
        LatticeClass::Hexagonal => {
            let a = l * (2.0 / 3f64.sqrt()).sqrt();
            ([a, 0.0], [a / 2.0, a * 3f64.sqrt() / 2.0])
        }
    };
    LatticeBasis::new(t1, t2).expect("generator lattices are non-degenerate")
}

/// Every symmetry of the 12-feature basis realized by some element of `g`,
/// measured in the generator basis. Derived from [`point_operations`] combined
/// with lattice translations.
pub fn full_symmetry_set(g: WallpaperGroup) -> SymmetryProfile {
    let basis = generator_lattice(g, 1.0);
    let bm = basis.matrix();
    let binv = inverse(&bm).expect("non-degenerate");
    let mut out = SymmetryProfile::EMPTY;
    for op in point_operations(g) {
        let a = mat_mul(&mat_mul(&bm, &op.m_f64()), &binv);
        for ti in -2..=2 {
            for tj in -2..=2 {
                let beta = op.beta();
                let b = mat_vec(&bm, [beta[0] + ti as f64, beta[1] + tj as f64]);
                if let Some(s) = classify_isometry(&a, b, &basis) {
                    out = out.with(s);
                }
            }
        }
    }
    out
}

/// Names the 12-basis symmetry realized by `x -> a x + b`, if any.
pub fn classify_isometry(a: &Mat2, b: Vec2, basis: &LatticeBasis) -> Option<Symmetry> {
    if det(a) > 0.0 {
        let theta = a[1][0].atan2(a[0][0]).to_degrees().abs();
        let near = |t: f64| (theta - t).abs() < 1e-6;
        return if near(180.0) {
            Some(Symmetry::R2)
        } else if near(120.0) {
            Some(Symmetry::R3)
        } else if near(90.0) {
            Some(Symmetry::R4)
        } else if near(60.0) {
            Some(Symmetry::R6)
        } else {
            None
        };
    }
    let phi = a[1][0].atan2(a[0][0]) / 2.0;
    let v = [phi.cos(), phi.sin()];
    let ab = mat_vec(a, b);
    let g = dot([(b[0] + ab[0]) / 2.0, (b[1] + ab[1]) / 2.0], v);
    for axis in Axis::ALL {
        let av = axis.vector(basis);
        let len = norm(av);
        if cross(v, av).abs() / len > 1e-9 {
            continue;
        }
        let frac = (g / len).rem_euclid(1.0);
        if frac < 1e-6 || frac > 1.0 - 1e-6 {
            return Some(Symmetry::reflection(axis));
        }
        if (frac - 0.5).abs() < 1e-6 {
            return Some(Symmetry::glide(axis));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Wallpaper group hierarchy
// ---------------------------------------------------------------------------

/// Drawn edges `A -> B` (B is a subgroup of A).
pub const WGH_EDGES: &[(WallpaperGroup, &[WallpaperGroup])] = {
    use WallpaperGroup::*;
    &[
        (P6M, &[P6, P31M, P3M1, CMM]),
        (P6, &[P3, P2]),
        (P31M, &[P3, CM]),
        (P3M1, &[P3, CM]),
        (P3, &[P1]),
        (P4M, &[P4, P4G, PMM, CMM]),
        (P4G, &[P4, PGG, CMM]),
        (P4, &[P2]),
        (CMM, &[PMM, PMG, PGG, CM, P2]),
        (PMM, &[PMG, PM, P2]),
        (PMG, &[PGG, PM, PG, P2]),
        (PGG, &[PG, P2]),
        (CM, &[PM, PG, P1]),
        (PM, &[PG, P1]),
        (PG, &[P1]),
        (P2, &[P1]),
    ]
};

/// Reflexive–transitive closure of [`WGH_EDGES`].
#[derive(Clone, Debug)]
pub struct WghGraph {
    reach: [[bool; NUM_GROUPS]; NUM_GROUPS],
}

impl WghGraph {
    pub fn build() -> Self {
        let mut reach = [[false; NUM_GROUPS]; NUM_GROUPS];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, subs) in WGH_EDGES {
            for b in subs.iter() {
                reach[a.index()][b.index()] = true;
            }
        }
        for k in 0..NUM_GROUPS {
            for i in 0..NUM_GROUPS {
                if reach[i][k] {
                    for j in 0..NUM_GROUPS {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        Self { reach }
    }

    pub fn global() -> &'static WghGraph {
        static GRAPH: OnceLock<WghGraph> = OnceLock::new();
        GRAPH.get_or_init(WghGraph::build)
    }

    /// `h` is reachable from `g`.
    pub fn is_subgroup(&self, h: WallpaperGroup, g: WallpaperGroup) -> bool {
        self.reach[g.index()][h.index()]
    }

    pub fn related(&self, a: WallpaperGroup, b: WallpaperGroup) -> bool {
        self.is_subgroup(a, b) || self.is_subgroup(b, a)
    }
}

pub fn subgroup_of(h: WallpaperGroup, g: WallpaperGroup) -> bool {
    WghGraph::global().is_subgroup(h, g)
}
