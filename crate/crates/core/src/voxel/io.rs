//! `VOXG` binary occupancy files.
//!
//! Layout (little-endian): magic `VOXG`, `u32` version 1, `u32` resolution,
//! `u32` reserved zero, then `ceil(d³/8)` bytes of occupancy bits. Bit `v`
//! (voxel index `x + d·(y + d·z)`) is bit `v % 8` of byte `v / 8`.

use std::fs;
use std::path::Path;

use super::{VoxelError, VoxelGrid};

pub const MAGIC: [u8; 4] = *b"VOXG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;
/// Largest resolution a file may declare.
pub const MAX_RESOLUTION: u32 = 2048;

/// Total file size for a grid of side `d`.
pub fn encoded_len(d: usize) -> usize {
    HEADER_LEN + d.pow(3).div_ceil(8)
}

pub fn encode(grid: &VoxelGrid) -> Vec<u8> {
    let d = grid.resolution();
    let mut out = Vec::with_capacity(encoded_len(d));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for chunk in grid.occupancy().chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |b, (bit, &v)| b | ((v as u8) << bit));
        out.push(byte);
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<VoxelGrid, VoxelError> {
    if bytes.len() < HEADER_LEN {
        return Err(VoxelError::Truncated {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(VoxelError::BadMagic(magic));
    }
    let version = word(4);
    if version != VERSION {
        return Err(VoxelError::UnsupportedVersion(version));
    }
    let d = word(8);
    if d == 0 || d > MAX_RESOLUTION {
        return Err(VoxelError::ResolutionOverflow(d));
    }
    if word(12) != 0 {
        return Err(VoxelError::Malformed("reserved header word is not zero".into()));
    }
    let d = d as usize;
    let voxels = d.pow(3);
    let expected = encoded_len(d);
    if bytes.len() < expected {
        return Err(VoxelError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(VoxelError::Malformed(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    if voxels % 8 != 0 {
        let used = voxels % 8;
        if payload[payload.len() - 1] >> used != 0 {
            return Err(VoxelError::Malformed("padding bits set in last byte".into()));
        }
    }
    let occupancy = (0..voxels).map(|v| payload[v / 8] >> (v % 8) & 1 == 1).collect();
    VoxelGrid::from_occupancy(d, occupancy)
}

pub fn write_grid(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<(), VoxelError> {
    let path = path.as_ref();
    fs::write(path, encode(grid)).map_err(|e| VoxelError::io(path, e))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<VoxelGrid, VoxelError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| VoxelError::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: &[u8; 4], version: u32, d: u32, reserved: u32) -> Vec<u8> {
        let mut b = magic.to_vec();
        for w in [version, d, reserved] {
            b.extend_from_slice(&w.to_le_bytes());
        }
        b
    }

    #[test]
    fn file_of_side_32_is_4112_bytes() {
        let g = VoxelGrid::new(32);
        assert_eq!(encode(&g).len(), 16 + 4096);
        assert_eq!(encoded_len(32), 4112);
    }

    #[test]
    fn bit_order_is_lsb_first() {
        let mut g = VoxelGrid::new(2);
        g.set(1, 0, 0, true);
        g.set(1, 1, 1, true);
        let bytes = encode(&g);
        assert_eq!(bytes[16], 0b1000_0010);
    }

    #[test]
    fn typed_errors() {
        let mut bad = encode(&VoxelGrid::new(4));
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(VoxelError::BadMagic(_))));

        let good = encode(&VoxelGrid::new(4));
        assert!(matches!(decode(&good[..20]), Err(VoxelError::Truncated { expected: 24, got: 20 })));
        assert!(matches!(decode(&good[..7]), Err(VoxelError::Truncated { .. })));

        assert!(matches!(
            decode(&header(b"VOXG", 1, 1 << 20, 0)),
            Err(VoxelError::ResolutionOverflow(_))
        ));
        assert!(matches!(decode(&header(b"VOXG", 1, 0, 0)), Err(VoxelError::ResolutionOverflow(0))));
        assert!(matches!(decode(&header(b"VOXG", 2, 4, 0)), Err(VoxelError::UnsupportedVersion(2))));
        assert!(matches!(decode(&header(b"VOXG", 1, 4, 9)), Err(VoxelError::Malformed(_))));

        let mut odd = header(b"VOXG", 1, 3, 0);
        odd.extend_from_slice(&[0, 0, 0, 0b1111_1000]);
        assert!(matches!(decode(&odd), Err(VoxelError::Malformed(_))));
    }
}
