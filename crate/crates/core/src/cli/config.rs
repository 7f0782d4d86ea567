//! Scenario config files: flat TOML, `key = value` pairs with optional
//! `[section]` tables one level deep.
//!
//! ```toml
//! # regression scenario
//! profile = "mmwave"
//! window_s = 60
//!
//! [distant]
//! bs = "distant-2km"
//! ```
//!
//! Keys before the first header belong to the unnamed global section.
//! Arrays are flattened to comma-separated text, so `seeds = [1, 2]` and
//! `seeds = "1, 2"` are equivalent.

use std::path::Path;

use toml::de::{DeTable, DeValue};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Section {
    /// Empty for the global section.
    pub name: String,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.key == key).map(|e| e.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigFile {
    sections: Vec<Section>,
}

fn line_of(text: &str, offset: usize) -> u64 {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|b| **b == b'\n').count() as u64 + 1
}

fn scalar_text(value: &DeValue<'_>) -> Option<String> {
    Some(match value {
        DeValue::String(s) => s.to_string(),
        DeValue::Integer(i) => {
            let digits = i.as_str().replace('_', "");
            i64::from_str_radix(&digits, i.radix()).map(|v| v.to_string()).unwrap_or(digits)
        }
        DeValue::Float(f) => f.as_str().replace('_', ""),
        DeValue::Boolean(b) => b.to_string(),
        _ => return None,
    })
}

fn value_text(value: &DeValue<'_>) -> Option<String> {
    match value {
        DeValue::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(|v| scalar_text(v.get_ref())).collect();
            parts.map(|p| p.join(", "))
        }
        other => scalar_text(other),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let root = DeTable::parse(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        let mut sections = vec![Section::default()];
        let entry = |key: &str, value: &toml::Spanned<DeValue<'_>>| -> Result<Entry> {
            let line = line_of(text, value.span().start);
            let rendered = value_text(value.get_ref())
                .ok_or_else(|| Error::Parse { line, message: format!("unsupported value for {key}") })?;
            Ok(Entry { key: key.replace('-', "_"), value: rendered, line })
        };
        for (key, value) in root.get_ref().iter() {
            match value.get_ref() {
                DeValue::Table(table) => {
                    let mut section = Section { name: key.get_ref().to_string(), entries: Vec::new() };
                    for (k, v) in table.iter() {
                        if matches!(v.get_ref(), DeValue::Table(_)) {
                            let line = line_of(text, k.span().start);
                            return Err(Error::Parse {
                                line,
                                message: format!("nested table {}.{}", section.name, k.get_ref()),
                            });
                        }
                        section.entries.push(entry(k.get_ref(), v)?);
                    }
                    sections.push(section);
                }
                _ => sections[0].entries.push(entry(key.get_ref(), value)?),
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn global(&self) -> &Section {
        &self.sections[0]
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().skip(1).find(|s| s.name == name)
    }

    /// Named sections in file order.
    pub fn named(&self) -> impl Iterator<Item = &Section> {
        self.sections.iter().skip(1)
    }

    /// Global entries followed by those of `name`, so section values win.
    pub fn resolved(&self, name: Option<&str>) -> Result<Vec<Entry>> {
        let mut out = self.global().entries.clone();
        if let Some(name) = name {
            let sec = self.section(name).ok_or_else(|| Error::Config(format!("no section [{name}] in config")))?;
            out.extend(sec.entries.iter().cloned());
        }
        Ok(out)
    }
}

/// Splits a comma-separated list value, dropping blanks.
pub fn split_list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let text = "# c\nprofile = \"lte\"\n\n[far]\nbs=\"distant-2km\"\nrate-mbps = 10\n# c\n";
        let cfg = ConfigFile::parse(text).unwrap();
        assert_eq!(cfg.global().get("profile"), Some("lte"));
        let far = cfg.section("far").unwrap();
        assert_eq!(far.get("rate_mbps"), Some("10"));
        assert_eq!(far.entries[0].line, 5);
        let keys: Vec<_> = cfg.resolved(Some("far")).unwrap().into_iter().map(|e| e.key).collect();
        assert_eq!(keys, ["profile", "bs", "rate_mbps"]);
        assert!(cfg.resolved(Some("near")).is_err());
    }

    #[test]
    fn sections_keep_file_order() {
        let cfg = ConfigFile::parse("[zeta]\na = 1\n[alpha]\na = 2\n").unwrap();
        let names: Vec<_> = cfg.named().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["zeta", "alpha"]);
    }

    #[test]
    fn values_flatten_to_text() {
        let cfg = ConfigFile::parse("a = [1, 2.5, \"x\"]\nb = 1_000\nc = true\nd = 0x10\ne = 1e-3\n").unwrap();
        let g = cfg.global();
        assert_eq!(g.get("a"), Some("1, 2.5, x"));
        assert_eq!(g.get("b"), Some("1000"));
        assert_eq!(g.get("c"), Some("true"));
        assert_eq!(g.get("d"), Some("16"));
        assert_eq!(g.get("e").unwrap().parse::<f64>().unwrap(), 1e-3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, want) in [
            ("a = 1\nnonsense\n", 2),
            ("[x\n", 1),
            ("[a]\n[a]\n", 2),
            ("a = 1\na = 2\n", 2),
            ("[a]\nb = 1\n[a.c]\nd = 2\n", 3),
            ("a = 1\nb = [[1]]\n", 2),
        ] {
            match ConfigFile::parse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn lists() {
        assert_eq!(split_list("a, b,,c "), ["a", "b", "c"]);
        assert!(split_list("").is_empty());
    }
}
