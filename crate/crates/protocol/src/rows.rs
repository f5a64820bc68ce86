//! Per-row authenticated encryption and the encrypted dataset file.
//!
//! Record layout, little-endian:
//! `j: u32 | n: u32 | nonce: [u8; 12] | ct_len: u32 | ct | tag: [u8; 16]`.
//! `(j, n)` is the AEAD associated data, so a record cannot be renumbered or
//! moved to a dataset of another size without failing authentication.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::error::{ProtocolError, Result};
use crate::keys::SymKey;
use crate::Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedRowRecord {
    /// 1-based row index.
    pub index: u32,
    pub total: u32,
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 16],
}

pub fn associated_data(index: u32, total: u32) -> [u8; 8] {
    let mut ad = [0u8; 8];
    ad[..4].copy_from_slice(&index.to_le_bytes());
    ad[4..].copy_from_slice(&total.to_le_bytes());
    ad
}

impl EncryptedRowRecord {
    pub fn seal(index: u32, total: u32, row: &str, key: &SymKey, rng: &mut impl Rng) -> Self {
        let mut nonce = [0u8; 12];
        rng.fill_bytes(&mut nonce);
        let (ciphertext, tag) = key.seal(&nonce, &associated_data(index, total), row.as_bytes());
        EncryptedRowRecord { index, total, nonce, ciphertext, tag }
    }

    pub fn open(&self, key: &SymKey) -> Result<String> {
        let pt = key
            .open(&self.nonce, &associated_data(self.index, self.total), &self.ciphertext, &self.tag)
            .ok_or(ProtocolError::Tamper { index: self.index })?;
        String::from_utf8(pt).map_err(|_| ProtocolError::Format(format!("row {} is not UTF-8", self.index)))
    }

    pub fn encoded_len(&self) -> usize {
        4 + 4 + 12 + 4 + self.ciphertext.len() + 16
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.index.to_le_bytes())?;
        w.write_all(&self.total.to_le_bytes())?;
        w.write_all(&self.nonce)?;
        w.write_all(&(self.ciphertext.len() as u32).to_le_bytes())?;
        w.write_all(&self.ciphertext)?;
        w.write_all(&self.tag)
    }

    /// `Ok(None)` at a clean end of input.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>> {
        let mut head = [0u8; 4];
        match r.read(&mut head)? {
            0 => return Ok(None),
            n if n < 4 => r.read_exact(&mut head[n..]).map_err(truncated)?,
            _ => {}
        }
        let index = u32::from_le_bytes(head);
        let mut fixed = [0u8; 4 + 12 + 4];
        r.read_exact(&mut fixed).map_err(truncated)?;
        let total = u32::from_le_bytes(fixed[..4].try_into().unwrap());
        let nonce = fixed[4..16].try_into().unwrap();
        let len = u32::from_le_bytes(fixed[16..].try_into().unwrap()) as usize;
        let mut ciphertext = vec![0u8; len];
        r.read_exact(&mut ciphertext).map_err(truncated)?;
        let mut tag = [0u8; 16];
        r.read_exact(&mut tag).map_err(truncated)?;
        Ok(Some(EncryptedRowRecord { index, total, nonce, ciphertext, tag }))
    }
}

fn truncated(e: std::io::Error) -> ProtocolError {
    ProtocolError::Format(format!("truncated record: {e}"))
}

pub fn encrypt_dataset(rows: &[String], key: &SymKey, rng: &mut impl Rng) -> Vec<EncryptedRowRecord> {
    let total = rows.len() as u32;
    rows.iter().enumerate().map(|(i, row)| EncryptedRowRecord::seal(i as u32 + 1, total, row, key, rng)).collect()
}

pub fn write_records(records: &[EncryptedRowRecord], w: &mut impl Write) -> std::io::Result<()> {
    records.iter().try_for_each(|r| r.write_to(w))
}

pub fn read_records(r: &mut impl Read) -> Result<Vec<EncryptedRowRecord>> {
    let mut out = Vec::new();
    while let Some(rec) = EncryptedRowRecord::read_from(r)? {
        out.push(rec);
    }
    Ok(out)
}

pub fn encode_records(records: &[EncryptedRowRecord]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(records.iter().map(|r| r.encoded_len()).sum());
    write_records(records, &mut buf).expect("writing to a Vec");
    buf
}

pub fn decode_records(mut bytes: &[u8]) -> Result<Vec<EncryptedRowRecord>> {
    read_records(&mut bytes)
}

/// Decrypted rows of one worker, by 1-based index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecryptedPartition {
    pub rows: Vec<(u32, String)>,
    pub seen: BTreeSet<u32>,
}

pub fn decrypt_partition(records: &[EncryptedRowRecord], key: &SymKey, total: u32) -> Result<DecryptedPartition> {
    let mut out = DecryptedPartition::default();
    for r in records {
        if r.total != total {
            return Err(ProtocolError::InconsistentTotal { expected: total, got: r.total });
        }
        if r.index == 0 || r.index > total {
            return Err(ProtocolError::IndexOutOfRange { index: r.index, total });
        }
        let row = r.open(key)?;
        if !out.seen.insert(r.index) {
            return Err(ProtocolError::DuplicateIndex(r.index));
        }
        out.rows.push((r.index, row));
    }
    Ok(out)
}

/// Accepts iff the index sets are disjoint and together equal `1..=total`.
pub fn verify_coverage<'a>(total: u32, parts: impl IntoIterator<Item = &'a BTreeSet<u32>>) -> Result<()> {
    check_indices(total, parts.into_iter().flatten().copied())
}

/// Accepts iff `indices` lists every value of `1..=total` exactly once.
pub fn check_indices(total: u32, indices: impl IntoIterator<Item = u32>) -> Result<()> {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for j in indices {
        *counts.entry(j).or_default() += 1;
    }
    let missing: Vec<u32> = (1..=total).filter(|j| !counts.contains_key(j)).collect();
    let duplicated: Vec<u32> = counts.iter().filter(|(j, &c)| c > 1 || **j == 0 || **j > total).map(|(&j, _)| j).collect();
    if missing.is_empty() && duplicated.is_empty() {
        Ok(())
    } else {
        Err(ProtocolError::Coverage { missing, duplicated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rows(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{},{i},{}", i % 2, i * 3)).collect()
    }

    #[test]
    fn indices_and_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let key = SymKey::generate(&mut rng);
        let recs = encrypt_dataset(&rows(2), &key, &mut rng);
        assert_eq!(recs.iter().map(|r| (r.index, r.total)).collect::<Vec<_>>(), [(1, 2), (2, 2)]);
        assert_ne!(recs[0].nonce, recs[1].nonce);
        let back = decode_records(&encode_records(&recs)).unwrap();
        assert_eq!(back, recs);
        assert_eq!(decrypt_partition(&back, &key, 2).unwrap().rows, vec![(1, rows(2)[0].clone()), (2, rows(2)[1].clone())]);
    }

    #[test]
    fn flipped_byte_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = SymKey::generate(&mut rng);
        let mut recs = encrypt_dataset(&rows(3), &key, &mut rng);
        recs[1].ciphertext[0] ^= 1;
        assert!(matches!(decrypt_partition(&recs, &key, 3), Err(ProtocolError::Tamper { index: 2 })));
    }

    #[test]
    fn deletion_shows_in_coverage() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let key = SymKey::generate(&mut rng);
        let mut recs = encrypt_dataset(&rows(3), &key, &mut rng);
        recs.remove(1);
        let part = decrypt_partition(&recs, &key, 3).unwrap();
        match verify_coverage(3, [&part.seen]) {
            Err(ProtocolError::Coverage { missing, duplicated }) => {
                assert_eq!(missing, [2]);
                assert!(duplicated.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_and_renumbered() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = SymKey::generate(&mut rng);
        let recs = encrypt_dataset(&rows(3), &key, &mut rng);
        let dup = vec![recs[0].clone(), recs[0].clone()];
        assert!(matches!(decrypt_partition(&dup, &key, 3), Err(ProtocolError::DuplicateIndex(1))));
        let mut moved = recs[0].clone();
        moved.index = 3;
        assert!(matches!(decrypt_partition(&[moved], &key, 3), Err(ProtocolError::Tamper { index: 3 })));
        assert!(matches!(decrypt_partition(&recs, &key, 4), Err(ProtocolError::InconsistentTotal { expected: 4, got: 3 })));
    }

    #[test]
    fn truncated_file() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let key = SymKey::generate(&mut rng);
        let bytes = encode_records(&encrypt_dataset(&rows(3), &key, &mut rng));
        assert!(matches!(decode_records(&bytes[..bytes.len() - 3]), Err(ProtocolError::Format(_))));
    }
}
