//! Flat little-endian particle dump: `u64` count, then per particle
//! `x[3] v[3] F[9]` as `f64` (F row-major).

use std::io::{self, Read, Write};

use super::Particle;
use crate::geometry::{Mat3, Vec3};

pub const RECORD_BYTES: usize = 15 * 8;

pub fn write_particle_dump<W: Write>(mut out: W, particles: &[Particle]) -> io::Result<()> {
    out.write_all(&(particles.len() as u64).to_le_bytes())?;
    let mut record = Vec::with_capacity(RECORD_BYTES);
    for p in particles {
        record.clear();
        for v in p.x.iter().chain(p.v.iter()) {
            record.extend_from_slice(&v.to_le_bytes());
        }
        for r in 0..3 {
            for c in 0..3 {
                record.extend_from_slice(&p.f[(r, c)].to_le_bytes());
            }
        }
        out.write_all(&record)?;
    }
    Ok(())
}

/// Reads a dump back as `(x, v, F)` triples.
pub fn read_particle_dump<R: Read>(mut input: R) -> io::Result<Vec<(Vec3, Vec3, Mat3)>> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut vals = [0.0f64; 15];
    for _ in 0..count {
        for v in vals.iter_mut() {
            input.read_exact(&mut word)?;
            *v = f64::from_le_bytes(word);
        }
        out.push((
            Vec3::new(vals[0], vals[1], vals[2]),
            Vec3::new(vals[3], vals[4], vals[5]),
            Mat3::from_row_slice(&vals[6..15]),
        ));
    }
    Ok(out)
}
