use std::env;

use symint::model::{CachedModel, ExternalModel, FaultyModel, Integrator, ReferenceModel, Transport};
use symint::oracle::FaultSpec;

/// Which integrator a run talks to.
#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    Reference,
    Faulty(FaultSpec),
    External(Transport),
}

pub const ADDR_VAR: &str = "SYMINT_MODEL_ADDR";
pub const CMD_VAR: &str = "SYMINT_MODEL_CMD";

/// Parses `reference`, `faulty[:SPEC]` or `external:cmd=...|tcp=...`.
/// A bare `external:tcp` or `external:cmd` reads the address or command
/// from the environment. The faulty seed defaults to the run seed.
pub fn parse(s: &str, run_seed: u64) -> Result<Backend, String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "reference" if rest.is_empty() => Ok(Backend::Reference),
        "faulty" => {
            let mut spec = FaultSpec::parse(rest)?;
            if !rest.split(',').any(|p| p.trim().starts_with("seed=")) {
                spec.seed = run_seed;
            }
            spec.validate()?;
            Ok(Backend::Faulty(spec))
        }
        "external" => {
            let from_env = |var: &str| env::var(var).map_err(|_| format!("{var} is not set"));
            let t = match rest.split_once('=') {
                Some(("cmd", c)) if !c.is_empty() => Transport::Command(c.to_string()),
                Some(("tcp", a)) if !a.is_empty() => Transport::Tcp(a.to_string()),
                None if rest == "cmd" => Transport::Command(from_env(CMD_VAR)?),
                None if rest == "tcp" => Transport::Tcp(from_env(ADDR_VAR)?),
                _ => return Err(format!("expected external:cmd=COMMAND or external:tcp=HOST:PORT, got `{s}`")),
            };
            Ok(Backend::External(t))
        }
        _ => Err(format!("unknown model `{s}`; expected reference, faulty:SPEC or external:...")),
    }
}

impl Backend {
    /// Connects and wraps the backend in a cache.
    pub fn open(&self) -> Result<Box<dyn Integrator>, symint::model::ModelError> {
        Ok(match self {
            Backend::Reference => Box::new(CachedModel::new(ReferenceModel)),
            Backend::Faulty(spec) => Box::new(CachedModel::new(FaultyModel::new(spec.clone()))),
            Backend::External(t) => Box::new(CachedModel::new(ExternalModel::connect(t)?)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors() {
        assert_eq!(parse("reference", 0), Ok(Backend::Reference));
        match parse("faulty:p=0.5", 9).unwrap() {
            Backend::Faulty(s) => assert_eq!((s.default_p, s.seed), (0.5, 9)),
            other => panic!("{other:?}"),
        }
        match parse("faulty:p=0.5,seed=3", 9).unwrap() {
            Backend::Faulty(s) => assert_eq!(s.seed, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            parse("external:tcp=127.0.0.1:9", 0),
            Ok(Backend::External(Transport::Tcp("127.0.0.1:9".into())))
        );
        assert_eq!(
            parse("external:cmd=python3 a.py", 0),
            Ok(Backend::External(Transport::Command("python3 a.py".into())))
        );
        assert!(parse("faulty:p=2", 0).is_err());
        assert!(parse("oracle", 0).is_err());
        assert!(parse("external:udp=x", 0).is_err());
    }
}
