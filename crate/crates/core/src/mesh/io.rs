//! "PLAPFIELD v1" field dumps: one ASCII header line
//! `PLAPFIELD 1 <d> <n_1..n_d> <h_1..h_d>` followed by the node values as
//! little-endian `f64`, row-major, components interleaved per node.

use std::io::{BufRead, Write};

use crate::error::{PlapError, Result};

use super::field::VectorField;
use super::grid::GridSpec;

pub const MAGIC: &str = "PLAPFIELD";
pub const VERSION: u32 = 1;

pub fn write_field<W: Write>(v: &VectorField, mut out: W) -> Result<()> {
    let grid = v.grid();
    let mut header = format!("{MAGIC} {VERSION} {}", grid.dim());
    for n in grid.counts() {
        header.push_str(&format!(" {n}"));
    }
    for h in grid.spacings() {
        // `{:?}` on f64 is the shortest representation that round-trips.
        header.push_str(&format!(" {h:?}"));
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(v.values().len() * 8);
    for x in v.values() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: BufRead>(mut input: R) -> Result<VectorField> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let header = header
        .strip_suffix('\n')
        .ok_or_else(|| PlapError::Format("PLAPFIELD header is not newline-terminated".into()))?;
    let mut tokens = header.split(' ');
    if tokens.next() != Some(MAGIC) {
        return Err(PlapError::Format("missing PLAPFIELD magic".into()));
    }
    let version: u32 = parse(tokens.next(), "version")?;
    if version != VERSION {
        return Err(PlapError::Format(format!(
            "unsupported PLAPFIELD version {version} (expected {VERSION})"
        )));
    }
    let d: usize = parse(tokens.next(), "dimension")?;
    if !(1..=3).contains(&d) {
        return Err(PlapError::Format(format!("invalid dimension {d}")));
    }
    let counts = (0..d)
        .map(|_| parse::<usize>(tokens.next(), "node count"))
        .collect::<Result<Vec<_>>>()?;
    let spacings = (0..d)
        .map(|_| parse::<f64>(tokens.next(), "spacing"))
        .collect::<Result<Vec<_>>>()?;
    if tokens.next().is_some() {
        return Err(PlapError::Format(
            "trailing tokens in PLAPFIELD header".into(),
        ));
    }
    let grid = GridSpec::from_spacings(&counts, &spacings)?;
    let len = grid.node_count() * d;
    let mut bytes = vec![0u8; len * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|e| PlapError::Format(format!("truncated PLAPFIELD payload: {e}")))?;
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(PlapError::Format(
            "PLAPFIELD payload longer than header declares".into(),
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    VectorField::from_values(&grid, values).map_err(|e| PlapError::Format(e.to_string()))
}

pub fn save_field(v: &VectorField, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field(v, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &std::path::Path) -> Result<VectorField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| PlapError::Format(format!("PLAPFIELD header missing {what}")))?
        .parse()
        .map_err(|_| PlapError::Format(format!("PLAPFIELD header has invalid {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_support::random_field;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(seed in any::<u64>(), d in 1usize..=3, n in 1usize..6, l in 0.1f64..10.0) {
            let grid = GridSpec::new(&vec![l; d], &vec![n; d]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_field(&grid, &mut rng);
            let mut buf = Vec::new();
            write_field(&v, &mut buf).unwrap();
            let back = read_field(&buf[..]).unwrap();
            prop_assert_eq!(back.grid().counts(), grid.counts());
            for k in 0..d {
                prop_assert_eq!(back.grid().spacing(k).to_bits(), grid.spacing(k).to_bits());
            }
            let a: Vec<u64> = v.values().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = back.values().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn header_layout() {
        let grid = GridSpec::new(&[1.0, 2.0], &[3, 1]).unwrap();
        let v = VectorField::zeros(&grid);
        let mut buf = Vec::new();
        write_field(&v, &mut buf).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(
            std::str::from_utf8(&buf[..nl]).unwrap(),
            "PLAPFIELD 1 2 3 1 0.25 1.0"
        );
        assert_eq!(buf.len() - nl - 1, 3 * 2 * 8);
    }

    #[test]
    fn stale_version_is_rejected() {
        let mut buf = b"PLAPFIELD 0 1 1 0.5\n".to_vec();
        buf.extend_from_slice(&1.0f64.to_le_bytes());
        let err = read_field(&buf[..]).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let buf = b"PLAPFIELD 1 1 2 0.5\n\0\0\0".to_vec();
        assert!(matches!(read_field(&buf[..]), Err(PlapError::Format(_))));
    }
}
