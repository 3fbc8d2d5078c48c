pub mod evaluate;
pub mod groups;
pub mod pool;
pub mod simulate;

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::errors::CliError;

/// Loads a JSON config file mirroring a command's flags. Flags given on the
/// command line take precedence over config values.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let text = crate::io::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        }
    }
}

/// Flag value if given, else config value, else default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
