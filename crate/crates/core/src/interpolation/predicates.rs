//! Orientation and in-circle tests. A floating-point evaluation is accepted
//! when its magnitude clears a forward error bound; otherwise the
//! determinant is recomputed exactly on integers.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

pub type Point = (f64, f64);

const EPS: f64 = f64::EPSILON * 0.5;
const ORIENT_BOUND: f64 = (3.0 + 16.0 * EPS) * EPS;
const INCIRCLE_BOUND: f64 = (10.0 + 96.0 * EPS) * EPS;

/// Sign of the signed area of (a, b, c): positive for a counterclockwise turn.
pub fn orient2d(a: Point, b: Point, c: Point) -> Ordering {
    let left = (b.0 - a.0) * (c.1 - a.1);
    let right = (b.1 - a.1) * (c.0 - a.0);
    let det = left - right;
    let bound = ORIENT_BOUND * (left.abs() + right.abs());
    if det > bound {
        Ordering::Greater
    } else if -det > bound {
        Ordering::Less
    } else {
        orient2d_exact(a, b, c)
    }
}

/// Positive when `d` lies strictly inside the circle through the
/// counterclockwise triangle (a, b, c).
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> Ordering {
    let (adx, ady) = (a.0 - d.0, a.1 - d.1);
    let (bdx, bdy) = (b.0 - d.0, b.1 - d.1);
    let (cdx, cdy) = (c.0 - d.0, c.1 - d.1);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let bc = bdx * cdy - cdx * bdy;
    let ca = cdx * ady - adx * cdy;
    let ab = adx * bdy - bdx * ady;
    let det = alift * bc + blift * ca + clift * ab;
    let permanent = ((bdx * cdy).abs() + (cdx * bdy).abs()) * alift
        + ((cdx * ady).abs() + (adx * cdy).abs()) * blift
        + ((adx * bdy).abs() + (bdx * ady).abs()) * clift;
    let bound = INCIRCLE_BOUND * permanent;
    if det > bound {
        Ordering::Greater
    } else if -det > bound {
        Ordering::Less
    } else {
        incircle_exact(a, b, c, d)
    }
}

/// Mantissa and binary exponent with `x == m * 2^e`.
fn decompose(x: f64) -> (i64, i32) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1i64 << 52), exp - 1075)
    };
    if bits >> 63 == 1 {
        (-m, e)
    } else {
        (m, e)
    }
}

/// Scales every coordinate by one common power of two so all become integers.
/// The predicates are homogeneous, so the sign is unchanged.
fn to_integers<const N: usize>(coords: [f64; N]) -> [BigInt; N] {
    let parts = coords.map(decompose);
    let min_exp = parts
        .iter()
        .filter(|(m, _)| *m != 0)
        .map(|&(_, e)| e)
        .min()
        .unwrap_or(0);
    parts.map(|(m, e)| {
        if m == 0 {
            BigInt::zero()
        } else {
            BigInt::from(m) << ((e - min_exp) as usize)
        }
    })
}

fn sign(v: &BigInt) -> Ordering {
    if v.is_positive() {
        Ordering::Greater
    } else if v.is_negative() {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

pub fn orient2d_exact(a: Point, b: Point, c: Point) -> Ordering {
    let [ax, ay, bx, by, cx, cy] = to_integers([a.0, a.1, b.0, b.1, c.0, c.1]);
    let det = (&bx - &ax) * (&cy - &ay) - (&by - &ay) * (&cx - &ax);
    sign(&det)
}

pub fn incircle_exact(a: Point, b: Point, c: Point, d: Point) -> Ordering {
    let [ax, ay, bx, by, cx, cy, dx, dy] = to_integers([a.0, a.1, b.0, b.1, c.0, c.1, d.0, d.1]);
    let (adx, ady) = (&ax - &dx, &ay - &dy);
    let (bdx, bdy) = (&bx - &dx, &by - &dy);
    let (cdx, cdy) = (&cx - &dx, &cy - &dy);
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let det = alift * (&bdx * &cdy - &cdx * &bdy)
        + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    sign(&det)
}
