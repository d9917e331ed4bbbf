//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use glance::BinaryImage;
use num_rational::BigRational;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIX_A_ROWS: [&str; 6] = ["0110", "1110", "1010", "1111", "1010", "1001"];

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Seeded random binary images, sizes 1x1 to `max`x`max`, at least one
/// foreground pixel each.
pub fn random_binary_corpus(count: usize, max: usize, seed: u64) -> Vec<BinaryImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rows = rng.gen_range(1..=max);
            let cols = rng.gen_range(1..=max);
            let density: f64 = rng.gen_range(0.2..0.9);
            let mut mask: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(density)).collect();
            if !mask.contains(&true) {
                let i = rng.gen_range(0..mask.len());
                mask[i] = true;
            }
            BinaryImage::from_mask(rows, cols, &mask).unwrap()
        })
        .collect()
}

/// Pore pixels by repeated relaxation: a background pixel is exterior if it
/// sits on the border or touches an exterior pixel; iterate to a fixpoint.
pub fn brute_force_pore_pixels(b: &BinaryImage) -> Vec<bool> {
    let (rows, cols) = (b.rows(), b.cols());
    let bg = |r: usize, c: usize| !b.is_foreground(r, c);
    let mut ext = vec![false; rows * cols];
    loop {
        let mut changed = false;
        for r in 0..rows {
            for c in 0..cols {
                if ext[r * cols + c] || !bg(r, c) {
                    continue;
                }
                let on_border = r == 0 || c == 0 || r == rows - 1 || c == cols - 1;
                let mut reach = on_border;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols && ext[nr as usize * cols + nc as usize] {
                            reach = true;
                        }
                    }
                }
                if reach {
                    ext[r * cols + c] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..rows * cols).map(|i| bg(i / cols, i % cols) && !ext[i]).collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Union-find over 8-adjacent pore pixels; returns a component
/// representative per pore pixel (None elsewhere).
pub fn brute_force_components(rows: usize, cols: usize, pore: &[bool]) -> Vec<Option<usize>> {
    let mut parent: Vec<usize> = (0..pore.len()).collect();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if !pore[i] {
                continue;
            }
            for (dr, dc) in [(0i64, 1i64), (1, -1), (1, 0), (1, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                    continue;
                }
                let j = nr as usize * cols + nc as usize;
                if pore[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..pore.len()).map(|i| pore[i].then(|| find(&mut parent, i))).collect()
}

/// Expected pore ids: components ranked by area (descending), then by
/// their first pixel in scan order.
pub fn expected_pore_ids(components: &[Option<usize>]) -> Vec<u32> {
    let mut info: BTreeMap<usize, (u64, usize)> = BTreeMap::new();
    for (i, c) in components.iter().enumerate() {
        if let Some(c) = c {
            let e = info.entry(*c).or_insert((0, i));
            e.0 += 1;
            e.1 = e.1.min(i);
        }
    }
    let mut ranked: Vec<(usize, (u64, usize))> = info.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    let id_of: BTreeMap<usize, u32> = ranked.iter().enumerate().map(|(k, (c, _))| (*c, k as u32 + 1)).collect();
    components.iter().map(|c| c.map_or(0, |c| id_of[&c])).collect()
}

/// Sorted component areas.
pub fn component_areas(components: &[Option<usize>]) -> Vec<u64> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for c in components.iter().flatten() {
        *counts.entry(*c).or_default() += 1;
    }
    let mut areas: Vec<u64> = counts.into_values().collect();
    areas.sort_unstable_by(|a, b| b.cmp(a));
    areas
}

/// Two labelings describe the same partition of pixels.
pub fn same_partition(a: &[Option<usize>], b: &[u32]) -> bool {
    let mut ab: BTreeMap<usize, u32> = BTreeMap::new();
    let mut ba: BTreeMap<u32, usize> = BTreeMap::new();
    for (x, &y) in a.iter().zip(b) {
        match (x, y) {
            (None, 0) => {}
            (Some(x), y) if y != 0 => {
                if *ab.entry(*x).or_insert(y) != y || *ba.entry(y).or_insert(*x) != *x {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Per-row (span, foreground, background, scatter) by direct scanning.
pub fn brute_force_rows(b: &BinaryImage) -> Vec<(u64, u64, u64, u64)> {
    (0..b.rows())
        .map(|r| {
            let fg: Vec<usize> = (0..b.cols()).filter(|&c| b.is_foreground(r, c)).collect();
            let (span, scatter) = match (fg.first(), fg.last()) {
                (Some(&a), Some(&z)) => {
                    let inside = (a..=z).filter(|&c| !b.is_foreground(r, c)).count();
                    ((z - a + 1) as u64, inside as u64)
                }
                _ => (0, 0),
            };
            (span, fg.len() as u64, (b.cols() - fg.len()) as u64, scatter)
        })
        .collect()
}

/// Otsu by the textbook definition in exact rational arithmetic:
/// sigma_b^2 = w0 * w1 * (mu0 - mu1)^2 over normalized class weights.
/// Smallest argmax wins.
pub fn otsu_oracle(hist: &[u64; 256]) -> Option<u8> {
    let n: u64 = hist.iter().sum();
    let rat = |v: u64| BigRational::from_integer(BigInt::from(v));
    let mut best: Option<(u8, BigRational)> = None;
    for t in 0..256usize {
        let (mut c0, mut s0, mut c1, mut s1) = (0u64, 0u64, 0u64, 0u64);
        for (i, &h) in hist.iter().enumerate() {
            if i <= t {
                c0 += h;
                s0 += i as u64 * h;
            } else {
                c1 += h;
                s1 += i as u64 * h;
            }
        }
        if c0 == 0 || c1 == 0 {
            continue;
        }
        let w0 = rat(c0) / rat(n);
        let w1 = rat(c1) / rat(n);
        let mu0 = rat(s0) / rat(c0);
        let mu1 = rat(s1) / rat(c1);
        let d = mu0 - mu1;
        let v = w0 * w1 * d.clone() * d;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((t as u8, v));
        }
    }
    best.map(|(t, _)| t)
}
