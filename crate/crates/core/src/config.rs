//! Flat `key = value` configuration shared by every command.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::backend::BackendKind;
use crate::datagen::GenConfig;
use crate::engine::{IndexSettings, SeedPolicy};
use crate::error::{Error, Result};
use crate::mvindex::MvConfig;
use crate::pagestore::StoreConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub gen: GenConfig,
    pub page_size_bytes: usize,
    pub key_bytes: usize,
    pub pointer_bytes: usize,
    /// Overrides the capacity derived from the page layout.
    pub record_capacity: Option<usize>,
    pub mv_d: Option<usize>,
    pub mv_split_low: Option<usize>,
    pub mv_split_high: Option<usize>,
    /// Total events the primitive backend accepts.
    pub primitive_max_events: Option<usize>,
    pub seed_policy: SeedPolicy,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            gen: GenConfig::default(),
            page_size_bytes: 512,
            key_bytes: 8,
            pointer_bytes: 4,
            record_capacity: None,
            mv_d: None,
            mv_split_low: None,
            mv_split_high: None,
            primitive_max_events: Some(5_000_000),
            seed_policy: SeedPolicy::First,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_opt(key: &str, v: &str) -> Result<Option<usize>> {
    if v == "none" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn show_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Blank lines and `#` comments are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let g = &mut self.gen;
        match key {
            "seed" => g.seed = parse_num(key, v)?,
            "num_objects" => g.num_objects = parse_num(key, v)?,
            "universe_miles" => g.universe_miles = parse_num(key, v)?,
            "width_cells" => g.width_cells = parse_num(key, v)?,
            "height_cells" => g.height_cells = parse_num(key, v)?,
            "duration" => g.duration = parse_num(key, v)?,
            "velocity_max" => g.velocity_max = parse_num(key, v)?,
            "zipf_skew" => g.zipf_skew = parse_num(key, v)?,
            "turn_max" => g.turn_max = parse_num(key, v)?,
            "query_count" => g.query_count = parse_num(key, v)?,
            "predicates_per_query_max" => g.predicates_per_query_max = parse_num(key, v)?,
            "target_output_lo" => g.target_output_range.0 = parse_num(key, v)?,
            "target_output_hi" => g.target_output_range.1 = parse_num(key, v)?,
            "interval_len_max" => g.interval_len_max = parse_num(key, v)?,
            "query_attempts" => g.query_attempts = parse_num(key, v)?,
            "page_size_bytes" => self.page_size_bytes = parse_num(key, v)?,
            "key_bytes" => self.key_bytes = parse_num(key, v)?,
            "pointer_bytes" => self.pointer_bytes = parse_num(key, v)?,
            "record_capacity" => self.record_capacity = parse_opt(key, v)?,
            "mv_d" => self.mv_d = parse_opt(key, v)?,
            "mv_split_low" => self.mv_split_low = parse_opt(key, v)?,
            "mv_split_high" => self.mv_split_high = parse_opt(key, v)?,
            "primitive_max_events" => self.primitive_max_events = parse_opt(key, v)?,
            "seed_policy" => {
                self.seed_policy = match v {
                    "first" => SeedPolicy::First,
                    "smallest" => SeedPolicy::SmallestCell,
                    _ => return Err(Error::Config(format!("seed_policy: expected first|smallest, got '{v}'"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.mv()?;
        Ok(())
    }

    pub fn store(&self) -> Result<StoreConfig> {
        let mut s = StoreConfig::from_layout(self.page_size_bytes, self.key_bytes, self.pointer_bytes)?;
        if let Some(b) = self.record_capacity {
            s.record_capacity = b;
            s.validate()?;
        }
        Ok(s)
    }

    pub fn mv(&self) -> Result<MvConfig> {
        let mut m = MvConfig::from_capacity(self.store()?.record_capacity);
        if let Some(d) = self.mv_d {
            m.d = d;
        }
        if let Some(l) = self.mv_split_low {
            m.split_low = l;
        }
        if let Some(h) = self.mv_split_high {
            m.split_high = h;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn index_settings(&self, backend: BackendKind) -> Result<IndexSettings> {
        Ok(IndexSettings {
            backend,
            store: self.store()?,
            mv: self.mv()?,
            primitive_cap: self.primitive_max_events,
        })
    }

    /// Every key with its current value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let g = &self.gen;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        kv("seed", g.seed.to_string());
        kv("num_objects", g.num_objects.to_string());
        kv("universe_miles", g.universe_miles.to_string());
        kv("width_cells", g.width_cells.to_string());
        kv("height_cells", g.height_cells.to_string());
        kv("duration", g.duration.to_string());
        kv("velocity_max", g.velocity_max.to_string());
        kv("zipf_skew", g.zipf_skew.to_string());
        kv("turn_max", g.turn_max.to_string());
        kv("query_count", g.query_count.to_string());
        kv("predicates_per_query_max", g.predicates_per_query_max.to_string());
        kv("target_output_lo", g.target_output_range.0.to_string());
        kv("target_output_hi", g.target_output_range.1.to_string());
        kv("interval_len_max", g.interval_len_max.to_string());
        kv("query_attempts", g.query_attempts.to_string());
        kv("page_size_bytes", self.page_size_bytes.to_string());
        kv("key_bytes", self.key_bytes.to_string());
        kv("pointer_bytes", self.pointer_bytes.to_string());
        kv("record_capacity", show_opt(self.record_capacity));
        kv("mv_d", show_opt(self.mv_d));
        kv("mv_split_low", show_opt(self.mv_split_low));
        kv("mv_split_high", show_opt(self.mv_split_high));
        kv("primitive_max_events", show_opt(self.primitive_max_events));
        let policy = match self.seed_policy {
            SeedPolicy::First => "first",
            SeedPolicy::SmallestCell => "smallest",
        };
        kv("seed_policy", policy.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_b42() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.store().unwrap().record_capacity, 42);
        let m = c.mv().unwrap();
        assert_eq!((m.d, m.split_low, m.split_high), (10, 15, 36));
    }

    #[test]
    fn round_trip() {
        let mut c = Config::default();
        c.gen.num_objects = 77;
        c.gen.zipf_skew = 1.5;
        c.record_capacity = Some(16);
        c.seed_policy = SeedPolicy::SmallestCell;
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_overrides() {
        let c = Config::parse("# desk\nnum_objects = 12 # few\n\nmv_d = 3\n").unwrap();
        assert_eq!(c.gen.num_objects, 12);
        assert_eq!(c.mv().unwrap().d, 3);
    }

    #[test]
    fn errors_name_the_field() {
        let e = Config::parse("bogus = 1").unwrap_err().to_string();
        assert!(e.contains("line 1") && e.contains("bogus"), "{e}");
        let e = Config::parse("num_objects = lots").unwrap_err().to_string();
        assert!(e.contains("num_objects"), "{e}");
        let e = Config::parse("target_output_lo = 9\ntarget_output_hi = 3").unwrap_err().to_string();
        assert!(e.contains("target_output_range"), "{e}");
        assert!(Config::parse("record_capacity = 3").is_err());
        assert!(Config::parse("just words").is_err());
    }
}
