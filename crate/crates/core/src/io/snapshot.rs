//! Binary vector tables.
//!
//! Layout (all integers little-endian): magic `ORAG`, `u32` version, `u64`
//! row count, `u64` dimension, `u8` dtype (0 = f64, 1 = f32), then one
//! `u32`-length-prefixed UTF-8 id per row, then the row-major values.

use std::path::Path;

use crate::catalog::{Catalog, ItemId, Precision};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ORAG";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Named rows of equal dimension, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTable {
    pub dim: usize,
    pub precision: Precision,
    pub ids: Vec<String>,
    pub data: Vec<f64>,
}

impl VectorTable {
    pub fn from_catalog(catalog: &Catalog) -> Self {
        VectorTable {
            dim: catalog.dim(),
            precision: catalog.precision(),
            ids: catalog.ids().iter().map(|i| i.to_string()).collect(),
            data: catalog.data().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn into_catalog(self) -> Result<Catalog> {
        let dim = self.dim;
        let rows: Vec<(ItemId, Vec<f64>)> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (ItemId::new(id), self.data[i * dim..(i + 1) * dim].to_vec()))
            .collect();
        Ok(Catalog::new(dim, rows)?.with_precision(self.precision))
    }
}

pub fn encode_table(table: &VectorTable) -> Result<Vec<u8>> {
    if table.data.len() != table.ids.len() * table.dim {
        return Err(Error::Snapshot(format!(
            "{} values do not fill {} rows of dimension {}",
            table.data.len(),
            table.ids.len(),
            table.dim
        )));
    }
    let width = match table.precision {
        Precision::F64 => 8,
        Precision::F32 => 4,
    };
    let mut out = Vec::with_capacity(25 + table.ids.iter().map(|s| 4 + s.len()).sum::<usize>() + width * table.data.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(table.ids.len() as u64).to_le_bytes());
    out.extend_from_slice(&(table.dim as u64).to_le_bytes());
    out.push(match table.precision {
        Precision::F64 => 0,
        Precision::F32 => 1,
    });
    for id in &table.ids {
        let len = u32::try_from(id.len()).map_err(|_| Error::Snapshot(format!("id of {} bytes is too long", id.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for &v in &table.data {
        match table.precision {
            Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
            Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Snapshot(format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode_table(bytes: &[u8]) -> Result<VectorTable> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.array("version")?);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(r.array("row count")?);
    let dim = u64::from_le_bytes(r.array("dimension")?);
    let precision = match r.array::<1>("dtype")?[0] {
        0 => Precision::F64,
        1 => Precision::F32,
        other => return Err(Error::Snapshot(format!("unknown dtype {other}"))),
    };
    let rows = usize::try_from(rows).map_err(|_| Error::Snapshot("row count overflows".into()))?;
    let dim = usize::try_from(dim).map_err(|_| Error::Snapshot("dimension overflows".into()))?;
    if dim == 0 {
        return Err(Error::Snapshot("dimension must be at least 1".into()));
    }
    // Every row needs at least its length prefix; reject absurd headers early.
    if rows > bytes.len() / 4 {
        return Err(Error::Snapshot(format!("header claims {rows} rows")));
    }
    let mut ids = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = u32::from_le_bytes(r.array("id length")?) as usize;
        let raw = r.take(len, "id")?;
        let id = std::str::from_utf8(raw).map_err(|_| Error::Snapshot("id is not valid UTF-8".into()))?;
        ids.push(id.to_string());
    }
    let count = rows
        .checked_mul(dim)
        .ok_or_else(|| Error::Snapshot("value count overflows".into()))?;
    let width = match precision {
        Precision::F64 => 8,
        Precision::F32 => 4,
    };
    let raw = r.take(
        count
            .checked_mul(width)
            .ok_or_else(|| Error::Snapshot("value count overflows".into()))?,
        "values",
    )?;
    let data = match precision {
        Precision::F64 => raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
        Precision::F32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
    };
    if r.pos != bytes.len() {
        return Err(Error::Snapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(VectorTable {
        dim,
        precision,
        ids,
        data,
    })
}

pub fn write_table(path: &Path, table: &VectorTable) -> Result<()> {
    super::write_atomic(path, &encode_table(table)?)
}

pub fn read_table(path: &Path) -> Result<VectorTable> {
    decode_table(&std::fs::read(path)?)
}

/// Atomically writes the catalog's live rows.
pub fn write_catalog(path: &Path, catalog: &Catalog) -> Result<()> {
    write_table(path, &VectorTable::from_catalog(catalog))
}

pub fn read_catalog(path: &Path) -> Result<Catalog> {
    read_table(path)?.into_catalog()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Catalog {
        Catalog::new(
            3,
            [
                (ItemId::new("b"), vec![1.0, -0.0, f64::MIN_POSITIVE]),
                (ItemId::new("a"), vec![0.1, 1e300, -2.5]),
                (ItemId::new("ü"), vec![3.0, 4.0, 5.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_table(&VectorTable::from_catalog(&sample())).unwrap();
        assert_eq!(&bytes[..4], b"ORAG");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(bytes[24], 0);
        assert_eq!(u32::from_le_bytes(bytes[25..29].try_into().unwrap()), 1);
        assert_eq!(&bytes[29..30], b"a");
        let ids_len = 3 * 4 + 1 + 1 + "ü".len();
        assert_eq!(bytes.len(), 25 + ids_len + 9 * 8);
    }

    #[test]
    fn catalog_round_trip_is_bitwise() {
        let cat = sample();
        let back = decode_table(&encode_table(&VectorTable::from_catalog(&cat)).unwrap())
            .unwrap()
            .into_catalog()
            .unwrap();
        assert_eq!(back.ids(), cat.ids());
        let bits = |c: &Catalog| c.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&cat));
    }

    #[test]
    fn f32_tables_store_four_bytes() {
        let cat = Catalog::new(2, [(ItemId::new("a"), vec![0.1, 0.2])])
            .unwrap()
            .with_precision(Precision::F32);
        let bytes = encode_table(&VectorTable::from_catalog(&cat)).unwrap();
        assert_eq!(bytes[24], 1);
        assert_eq!(bytes.len(), 25 + 4 + 1 + 2 * 4);
        let back = decode_table(&bytes).unwrap().into_catalog().unwrap();
        assert_eq!(back.data(), cat.data());
        assert_eq!(back.precision(), Precision::F32);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let good = encode_table(&VectorTable::from_catalog(&sample())).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_table(&bad), Err(Error::Snapshot(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(decode_table(&bad).is_err());
        let mut bad = good.clone();
        bad[24] = 7;
        assert!(decode_table(&bad).is_err());
        assert!(decode_table(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad.push(0);
        assert!(decode_table(&bad).is_err());
        let mut bad = good;
        bad[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_table(&bad).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cat.orag");
        write_catalog(&path, &sample()).unwrap();
        let back = read_catalog(&path).unwrap();
        assert_eq!(back.data(), sample().data());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn tables_round_trip(
            rows in proptest::collection::vec(("[a-z0-9]{1,8}", proptest::collection::vec(any::<f64>(), 2)), 0..8)
        ) {
            let table = VectorTable {
                dim: 2,
                precision: Precision::F64,
                ids: rows.iter().map(|r| r.0.clone()).collect(),
                data: rows.iter().flat_map(|r| r.1.clone()).collect(),
            };
            let back = decode_table(&encode_table(&table).unwrap()).unwrap();
            prop_assert_eq!(back.ids, table.ids);
            let bits = |d: &[f64]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.data), bits(&table.data));
        }
    }
}
