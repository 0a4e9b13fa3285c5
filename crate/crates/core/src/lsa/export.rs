//! Binary trajectory dump: magic `LSATRAJ1`, then n and d as little-endian
//! u64, then the iterates row-major as little-endian f64.

use std::io::{Read, Write};

use super::run::LsaTrajectory;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LSATRAJ1";

pub fn write_trajectory<W: Write>(traj: &LsaTrajectory, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(traj.n() as u64).to_le_bytes())?;
    out.write_all(&(traj.dim() as u64).to_le_bytes())?;
    for x in traj.iterates() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(mut input: R) -> Result<LsaTrajectory> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Document("not an LSATRAJ1 file".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    let len = n
        .checked_mul(d)
        .ok_or_else(|| Error::Document(format!("header n={n}, d={d} overflows")))?;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        input.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    LsaTrajectory::from_iterates(values, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let values = vec![0.1, -2.5, f64::MIN_POSITIVE, 1e300, -0.0, 3.0];
        let traj = LsaTrajectory::from_iterates(values.clone(), 2).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 16 + 6 * 8);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        let back = read_trajectory(buf.as_slice()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.iterates()), bits(&values));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_trajectory(&b"LSATRAJ0\0\0\0\0\0\0\0\0"[..]).is_err());
        let traj = LsaTrajectory::from_iterates(vec![1.0, 2.0], 1).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        buf.pop();
        assert!(read_trajectory(buf.as_slice()).is_err());
    }
}
