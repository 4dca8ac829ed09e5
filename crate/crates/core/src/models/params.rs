use std::str::FromStr;

use crate::{Error, Result};

/// Named, string-settable parameters of a preset.
pub trait ParamSet {
    fn set(&mut self, key: &str, value: &str) -> Result<()>;
    fn entries(&self) -> Vec<(&'static str, String)>;
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::InvalidParameter(format!("cannot parse `{value}` for `{key}`")))
}

macro_rules! param_set {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl $crate::models::params::ParamSet for $t {
            fn set(&mut self, key: &str, value: &str) -> $crate::Result<()> {
                match key {
                    $(stringify!($f) => self.$f = $crate::models::params::parse_value(key, value)?,)*
                    _ => return Err($crate::Error::InvalidParameter(format!("unknown parameter `{key}`"))),
                }
                Ok(())
            }

            fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($f), self.$f.to_string()),)*]
            }
        }
    };
}

pub(crate) use param_set;

pub(crate) fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

pub(crate) fn probability(name: &str, p: f64) -> Result<()> {
    check((0.0..=1.0).contains(&p), || format!("{name} = {p} is not a probability"))
}
