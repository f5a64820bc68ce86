use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sxgb_protocol::rows::*;
use sxgb_protocol::{ProtocolError, SymKey};

fn dataset(rng: &mut ChaCha20Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("{},{:.3},{:.3}", rng.gen_range(0..2), rng.gen::<f64>(), rng.gen::<f64>())).collect()
}

/// Single-bit flips anywhere in the authenticated fields.
#[test]
fn bit_flips_never_authenticate() {
    let mut rng = ChaCha20Rng::seed_from_u64(100);
    let key = SymKey::generate(&mut rng);
    let rows = dataset(&mut rng, 8);
    let records = encrypt_dataset(&rows, &key, &mut rng);
    let mut accepted = 0;
    for _ in 0..2000 {
        let mut r = records[rng.gen_range(0..records.len())].clone();
        match rng.gen_range(0..4) {
            0 => {
                let i = rng.gen_range(0..r.ciphertext.len());
                r.ciphertext[i] ^= 1 << rng.gen_range(0..8);
            }
            1 => r.tag[rng.gen_range(0..16)] ^= 1 << rng.gen_range(0..8),
            2 => r.index ^= 1 << rng.gen_range(0..32),
            _ => r.total ^= 1 << rng.gen_range(0..32),
        }
        if r.open(&key).is_ok() {
            accepted += 1;
        }
    }
    assert_eq!(accepted, 0);
}

#[test]
fn wrong_key_fails() {
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let (a, b) = (SymKey::generate(&mut rng), SymKey::generate(&mut rng));
    let rows = dataset(&mut rng, 3);
    let recs = encrypt_dataset(&rows, &a, &mut rng);
    assert!(matches!(decrypt_partition(&recs, &b, 3), Err(ProtocolError::Tamper { index: 1 })));
}

#[test]
fn file_roundtrip() {
    let mut rng = ChaCha20Rng::seed_from_u64(102);
    let key = SymKey::generate(&mut rng);
    let rows = dataset(&mut rng, 20);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.enc");
    let recs = encrypt_dataset(&rows, &key, &mut rng);
    write_records(&recs, &mut std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_records(&mut std::fs::File::open(&path).unwrap()).unwrap();
    let part = decrypt_partition(&back, &key, 20).unwrap();
    assert_eq!(part.rows.into_iter().map(|(_, r)| r).collect::<Vec<_>>(), rows);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Coverage accepts exactly the partitions of 1..=n into disjoint sets.
    #[test]
    fn coverage_accepts_exact_partitions(
        n in 1u32..40,
        assignment in proptest::collection::vec(0usize..4, 40),
        drop in proptest::option::of(0u32..40),
        dup in proptest::option::of((0u32..40, 0usize..4)),
    ) {
        let mut parts = vec![BTreeSet::new(); 4];
        for j in 1..=n {
            if drop != Some(j - 1) {
                parts[assignment[j as usize - 1]].insert(j);
            }
        }
        let mut duplicated = false;
        if let Some((j, w)) = dup {
            let j = j % n + 1;
            if drop != Some(j - 1) && !parts[w].contains(&j) {
                parts[w].insert(j);
                duplicated = true;
            }
        }
        let dropped = drop.is_some_and(|d| d < n);
        let ok = verify_coverage(n, &parts).is_ok();
        prop_assert_eq!(ok, !dropped && !duplicated);
    }
}
