use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE: Duration = Duration::from_millis(100);

pub(crate) fn client(timeout: Duration) -> Result<Client> {
    Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| Error::BackendUnavailable(format!("cannot build http client: {e}")))
}

/// POSTs `body` as JSON and decodes the JSON reply, retrying transport
/// failures and non-200 replies with exponential backoff.
pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(
    client: &Client,
    url: &str,
    body: &B,
) -> Result<R> {
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            thread::sleep(BACKOFF_BASE * 2u32.pow(attempt - 1));
        }
        match client.post(url).json(body).send() {
            Ok(resp) if resp.status() == reqwest::StatusCode::OK => {
                return resp
                    .json::<R>()
                    .map_err(|e| Error::BackendUnavailable(format!("{url}: bad response body: {e}")));
            }
            Ok(resp) => last = format!("{url}: HTTP {}", resp.status()),
            Err(e) => last = format!("{url}: {e}"),
        }
    }
    Err(Error::BackendUnavailable(format!("{last} (after {MAX_ATTEMPTS} attempts)")))
}
