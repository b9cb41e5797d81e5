//! Binary caches for enumerated groups and character tables.
//!
//! Group cache layout: magic "HFL1", p, l, n, generator list, element table
//! in canonical order, then a SHA-256 digest of everything before it. The
//! byte-exact canonical element encoding makes caches portable; a digest
//! mismatch quarantines the file instead of loading it.
//!
//! Table caches are keyed by the digest of the group cache they belong to
//! and store each character value as (conductor, coefficient vector).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::chartab::{CharacterTable, ClassFunction, ClassInfo};
use crate::cyclotomic::Cyclotomic;
use crate::error::GroupError;
use crate::group::FiniteGroup;
use crate::zmod::ZmodMatrix;

pub const GROUP_MAGIC: &[u8; 4] = b"HFL1";
pub const TABLE_MAGIC: &[u8; 4] = b"HFT1";

/// Environment variable consulted for the default cache directory.
pub const CACHE_DIR_ENV: &str = "HFL_CACHE_DIR";

fn factor_prime_power(modulus: u32) -> (u32, u32) {
    let p = (2..=modulus).find(|&p| modulus % p == 0).unwrap();
    let mut l = 0;
    let mut m = modulus;
    while m % p == 0 {
        m /= p;
        l += 1;
    }
    assert_eq!(m, 1, "modulus must be a prime power");
    (p, l)
}

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], GroupError> {
        if self.pos + n > self.buf.len() {
            return Err(GroupError::Cache("truncated cache file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, GroupError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, GroupError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64, GroupError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Serialize a group into the cache byte format (digest appended).
pub fn group_to_bytes(group: &FiniteGroup) -> Vec<u8> {
    let (p, l) = factor_prime_power(group.modulus);
    let mut w = ByteWriter::new();
    w.bytes(GROUP_MAGIC);
    w.u32(p);
    w.u32(l);
    w.u32(group.n as u32);
    w.u32(group.generators.len() as u32);
    for g in &group.generators {
        w.bytes(&g.entries);
    }
    w.u64(group.order() as u64);
    for i in 0..group.order() {
        w.bytes(&group.elem(i).entries);
    }
    let digest = Sha256::digest(&w.buf);
    w.bytes(&digest);
    w.buf
}

/// Digest of a group's cache image (identifies the group content).
pub fn group_digest(group: &FiniteGroup) -> String {
    let bytes = group_to_bytes(group);
    let digest = &bytes[bytes.len() - 32..];
    hex_string(digest)
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn group_from_bytes(buf: &[u8]) -> Result<Arc<FiniteGroup>, GroupError> {
    if buf.len() < 36 {
        return Err(GroupError::Cache("file too short".into()));
    }
    let (payload, digest) = buf.split_at(buf.len() - 32);
    let expect = Sha256::digest(payload);
    if digest != expect.as_slice() {
        return Err(GroupError::Cache("digest mismatch".into()));
    }
    let mut r = ByteReader::new(payload);
    if r.take(4)? != GROUP_MAGIC {
        return Err(GroupError::Cache("bad magic".into()));
    }
    let p = r.u32()?;
    let l = r.u32()?;
    let n = r.u32()? as usize;
    let modulus = p.pow(l);
    let gen_count = r.u32()? as usize;
    let sz = n * n;
    let mut generators = Vec::with_capacity(gen_count);
    for _ in 0..gen_count {
        generators.push(ZmodMatrix {
            n,
            modulus,
            entries: r.take(sz)?.to_vec(),
        });
    }
    let count = r.u64()? as usize;
    let mut elements = Vec::with_capacity(count);
    for _ in 0..count {
        elements.push(ZmodMatrix {
            n,
            modulus,
            entries: r.take(sz)?.to_vec(),
        });
    }
    FiniteGroup::from_element_table(n, modulus, generators, elements)
}

/// Serialize a character table, keyed to its group digest.
pub fn table_to_bytes(table: &CharacterTable, group_digest_hex: &str) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(TABLE_MAGIC);
    let dg = group_digest_hex.as_bytes();
    w.u32(dg.len() as u32);
    w.bytes(dg);
    w.u32(table.classes.count() as u32);
    w.u32(table.count() as u32);
    for chi in &table.irreducibles {
        for v in &chi.values {
            w.u64(v.conductor);
            w.u32(v.coeffs.len() as u32);
            for &c in &v.coeffs {
                w.i64(c);
            }
        }
    }
    let digest = Sha256::digest(&w.buf);
    w.bytes(&digest);
    w.buf
}

/// Load a table cache; the caller supplies the (already loaded) group and its
/// digest, which must match the key stored in the file.
pub fn table_from_bytes(
    buf: &[u8],
    classes: Arc<ClassInfo>,
    group_digest_hex: &str,
) -> Result<Arc<CharacterTable>, GroupError> {
    if buf.len() < 36 {
        return Err(GroupError::Cache("file too short".into()));
    }
    let (payload, digest) = buf.split_at(buf.len() - 32);
    let expect = Sha256::digest(payload);
    if digest != expect.as_slice() {
        return Err(GroupError::Cache("digest mismatch".into()));
    }
    let mut r = ByteReader::new(payload);
    if r.take(4)? != TABLE_MAGIC {
        return Err(GroupError::Cache("bad magic".into()));
    }
    let dlen = r.u32()? as usize;
    let key = r.take(dlen)?;
    if key != group_digest_hex.as_bytes() {
        return Err(GroupError::Cache("table cache keyed to a different group".into()));
    }
    let class_count = r.u32()? as usize;
    if class_count != classes.count() {
        return Err(GroupError::Cache("class count mismatch".into()));
    }
    let row_count = r.u32()? as usize;
    let mut rows = Vec::with_capacity(row_count);
    for _ in 0..row_count {
        let mut values = Vec::with_capacity(class_count);
        for _ in 0..class_count {
            let conductor = r.u64()?;
            let clen = r.u32()? as usize;
            let mut coeffs = Vec::with_capacity(clen);
            for _ in 0..clen {
                coeffs.push(r.i64()?);
            }
            values.push(Cyclotomic { conductor, coeffs });
        }
        rows.push(ClassFunction {
            classes: Arc::clone(&classes),
            values,
        });
    }
    CharacterTable::from_rows(classes, rows)
        .map_err(|e| GroupError::Cache(format!("invalid cached table: {e}")))
}

/// Cache directory manager: stores group and table caches, validates
/// digests, quarantines corrupt files.
pub struct CacheDir {
    pub root: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub file: String,
    pub kind: &'static str,
    pub bytes: u64,
    pub valid: bool,
}

impl CacheDir {
    pub fn new(root: impl Into<PathBuf>) -> std::io::Result<CacheDir> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(CacheDir { root })
    }

    /// Resolve from an explicit path or the HFL_CACHE_DIR environment
    /// variable, defaulting to ".hfl-cache".
    pub fn resolve(explicit: Option<&Path>) -> std::io::Result<CacheDir> {
        let root = match explicit {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(CACHE_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(".hfl-cache")),
        };
        Self::new(root)
    }

    pub fn group_path(&self, digest_hex: &str) -> PathBuf {
        self.root.join(format!("grp-{}.hfl", &digest_hex[..16]))
    }

    pub fn table_path(&self, group_digest_hex: &str) -> PathBuf {
        self.root.join(format!("tab-{}.hfl", &group_digest_hex[..16]))
    }

    pub fn store_group(&self, group: &FiniteGroup) -> std::io::Result<String> {
        let bytes = group_to_bytes(group);
        let digest = hex_string(&bytes[bytes.len() - 32..]);
        let path = self.group_path(&digest);
        if !path.exists() {
            let mut f = fs::File::create(&path)?;
            f.write_all(&bytes)?;
        }
        Ok(digest)
    }

    pub fn load_group(&self, digest_hex: &str) -> Result<Arc<FiniteGroup>, GroupError> {
        let path = self.group_path(digest_hex);
        let buf = read_file(&path)?;
        match group_from_bytes(&buf) {
            Ok(g) => Ok(g),
            Err(e) => {
                self.quarantine(&path);
                Err(e)
            }
        }
    }

    pub fn store_table(
        &self,
        table: &CharacterTable,
        group_digest_hex: &str,
    ) -> std::io::Result<()> {
        let bytes = table_to_bytes(table, group_digest_hex);
        let path = self.table_path(group_digest_hex);
        if !path.exists() {
            let mut f = fs::File::create(&path)?;
            f.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn load_table(
        &self,
        classes: Arc<ClassInfo>,
        group_digest_hex: &str,
    ) -> Result<Arc<CharacterTable>, GroupError> {
        let path = self.table_path(group_digest_hex);
        let buf = read_file(&path)?;
        match table_from_bytes(&buf, classes, group_digest_hex) {
            Ok(t) => Ok(t),
            Err(e) => {
                self.quarantine(&path);
                Err(e)
            }
        }
    }

    /// List entries, validating digests.
    pub fn list(&self) -> std::io::Result<Vec<CacheEntry>> {
        let mut out = Vec::new();
        let mut files: Vec<PathBuf> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "hfl").unwrap_or(false))
            .collect();
        files.sort();
        for path in files {
            let buf = read_file(&path).unwrap_or_default();
            let valid = validate_digest(&buf);
            let kind = match buf.get(0..4) {
                Some(m) if m == GROUP_MAGIC => "group",
                Some(m) if m == TABLE_MAGIC => "table",
                _ => "unknown",
            };
            out.push(CacheEntry {
                file: path.file_name().unwrap().to_string_lossy().into_owned(),
                kind,
                bytes: buf.len() as u64,
                valid,
            });
        }
        Ok(out)
    }

    /// Verify all digests; quarantine invalid files. Returns (ok, quarantined).
    pub fn verify(&self) -> std::io::Result<(usize, usize)> {
        let mut ok = 0usize;
        let mut bad = 0usize;
        for entry in self.list()? {
            if entry.valid {
                ok += 1;
            } else {
                bad += 1;
                self.quarantine(&self.root.join(&entry.file));
            }
        }
        Ok((ok, bad))
    }

    pub fn purge(&self) -> std::io::Result<usize> {
        let mut n = 0usize;
        for entry in fs::read_dir(&self.root)? {
            let path = entry?.path();
            let ext_ok = path
                .extension()
                .map(|e| e == "hfl" || e == "quarantined")
                .unwrap_or(false);
            if ext_ok {
                fs::remove_file(path)?;
                n += 1;
            }
        }
        Ok(n)
    }

    fn quarantine(&self, path: &Path) {
        let mut target = path.to_path_buf();
        target.set_extension("quarantined");
        let _ = fs::rename(path, target);
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, GroupError> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| GroupError::Cache(format!("{}: {e}", path.display())))?;
    Ok(buf)
}

fn validate_digest(buf: &[u8]) -> bool {
    if buf.len() < 36 {
        return false;
    }
    let (payload, digest) = buf.split_at(buf.len() - 32);
    Sha256::digest(payload).as_slice() == digest
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_group() -> Arc<FiniteGroup> {
        let gens = vec![
            ZmodMatrix::from_rows(&[&[1, 1], &[0, 1]], 4),
            ZmodMatrix::from_rows(&[&[3, 0], &[0, 1]], 4),
        ];
        FiniteGroup::generate(gens, 2, 4).unwrap()
    }

    #[test]
    fn group_roundtrip() {
        let g = small_group();
        let bytes = group_to_bytes(&g);
        let g2 = group_from_bytes(&bytes).unwrap();
        assert_eq!(g.order(), g2.order());
        for i in 0..g.order() {
            assert_eq!(g.elem(i), g2.elem(i));
            assert_eq!(g.words[i], g2.words[i]);
        }
        // Byte-exact restore.
        assert_eq!(bytes, group_to_bytes(&g2));
    }

    #[test]
    fn tampering_detected() {
        let g = small_group();
        let mut bytes = group_to_bytes(&g);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        assert!(group_from_bytes(&bytes).is_err());
    }

    #[test]
    fn table_roundtrip() {
        let g = small_group();
        let table = crate::chartab::character_table(Arc::clone(&g)).unwrap();
        let digest = group_digest(&g);
        let bytes = table_to_bytes(&table, &digest);
        let classes = Arc::clone(&table.classes);
        let table2 = table_from_bytes(&bytes, classes, &digest).unwrap();
        assert_eq!(table.count(), table2.count());
        for (a, b) in table.irreducibles.iter().zip(table2.irreducibles.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cache_dir_flow() {
        let tmp = std::env::temp_dir().join(format!("hfl-cache-test-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&tmp);
        let dir = CacheDir::new(&tmp).unwrap();
        assert!(dir.list().unwrap().is_empty());

        let g = small_group();
        let digest = dir.store_group(&g).unwrap();
        let table = crate::chartab::character_table(Arc::clone(&g)).unwrap();
        dir.store_table(&table, &digest).unwrap();
        let entries = dir.list().unwrap();
        assert_eq!(entries.len(), 2);
        assert!(entries.iter().all(|e| e.valid));

        // Tamper with the group cache: verify() must quarantine it.
        let path = dir.group_path(&digest);
        let mut buf = std::fs::read(&path).unwrap();
        buf[40] ^= 0xff;
        std::fs::write(&path, &buf).unwrap();
        let (ok, bad) = dir.verify().unwrap();
        assert_eq!((ok, bad), (1, 1));
        assert!(!path.exists());

        let purged = dir.purge().unwrap();
        assert_eq!(purged, 2);
        let _ = std::fs::remove_dir_all(&tmp);
    }
}
