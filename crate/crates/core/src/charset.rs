//! Serde helpers storing tile sets as strings.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(set: &BTreeSet<u8>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&set.iter().map(|b| *b as char).collect::<String>())
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<u8>, D::Error> {
    let s = String::deserialize(d)?;
    if !s.is_ascii() {
        return Err(serde::de::Error::custom("tile sets must be ASCII"));
    }
    Ok(s.bytes().collect())
}
