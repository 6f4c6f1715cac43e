use std::sync::OnceLock;

/// Proper rotation with integer entries in {-1, 0, 1}.
pub type Rot = [[i8; 3]; 3];

pub const IDENTITY: Rot = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

const RX: Rot = [[1, 0, 0], [0, 0, -1], [0, 1, 0]];
const RY: Rot = [[0, 0, 1], [0, 1, 0], [-1, 0, 0]];
const RZ: Rot = [[0, -1, 0], [1, 0, 0], [0, 0, 1]];

pub fn mul(a: &Rot, b: &Rot) -> Rot {
    let mut out = [[0i8; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn pow(r: &Rot, n: usize) -> Rot {
    (0..n).fold(IDENTITY, |acc, _| mul(&acc, r))
}

pub fn det(r: &Rot) -> i32 {
    let m = |i: usize, j: usize| r[i][j] as i32;
    m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
}

/// The 64 products `Rz^c · Ry^b · Rx^a` for quarter turns a, b, c, in that
/// loop order (a outermost).
pub fn raw_products() -> Vec<Rot> {
    let mut out = Vec::with_capacity(64);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                out.push(mul(&pow(&RZ, c), &mul(&pow(&RY, b), &pow(&RX, a))));
            }
        }
    }
    out
}

/// The 24 axis-aligned proper rotations: the raw products with duplicates
/// removed, first occurrence kept. Element 0 is the identity.
pub fn rotations24() -> &'static [Rot] {
    static ROTATIONS: OnceLock<Vec<Rot>> = OnceLock::new();
    ROTATIONS.get_or_init(|| {
        let mut out: Vec<Rot> = Vec::with_capacity(24);
        for r in raw_products() {
            if !out.contains(&r) {
                out.push(r);
            }
        }
        out
    })
}

pub fn transpose(r: &Rot) -> Rot {
    let mut t = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = r[j][i];
        }
    }
    t
}

pub fn apply(r: &Rot, p: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        // entries are -1/0/1 so this is exact sign flips and permutation
        for k in 0..3 {
            match r[i][k] {
                1 => *o += p[k],
                -1 => *o -= p[k],
                _ => {}
            }
        }
    }
    out
}
