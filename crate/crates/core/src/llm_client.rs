//! Class descriptions from a chat-completion endpoint, frozen in a local cache.
//!
//! Cache layout: `<dir>/<class>.txt` holds one description per class (the
//! class name with whitespace and path separators replaced by `_`), and
//! `<dir>/meta.txt` records how the last fetch was made.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PROMPT_TEMPLATE: &str = "Describe the {name} object in at most ten sentences using the specific physical features and do not need to mention the features that are not available in the object. Also, do not use any numeric in descriptions; instead, use words.";

pub fn build_prompt(class_name: &str) -> Result<String> {
    let name = class_name.trim();
    if name.is_empty() {
        return Err(Error::contract("class name must not be empty"));
    }
    Ok(PROMPT_TEMPLATE.replace("{name}", name))
}

/// Hex SHA-256 of the unfilled template.
pub fn prompt_hash() -> String {
    hex::encode(Sha256::digest(PROMPT_TEMPLATE.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub url: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            timeout: Duration::from_secs(60),
        }
    }
}

/// How the cached descriptions were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheMeta {
    pub model: String,
    pub temperature: f64,
    pub prompt_sha256: String,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

impl CacheMeta {
    fn to_text(&self) -> String {
        format!(
            "model={}\ntemperature={}\nprompt_sha256={}\nfetched_at={}\n",
            self.model, self.temperature, self.prompt_sha256, self.fetched_at
        )
    }

    fn parse(text: &str) -> Result<Self> {
        let mut model = None;
        let mut temperature = None;
        let mut hash = None;
        let mut at = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(Some(i + 1), "expected key=value"))?;
            let bad = |what: &str| Error::format(Some(i + 1), format!("bad {what} {v:?}"));
            match k.trim() {
                "model" => model = Some(v.trim().to_string()),
                "temperature" => temperature = Some(v.trim().parse().map_err(|_| bad("temperature"))?),
                "prompt_sha256" => hash = Some(v.trim().to_string()),
                "fetched_at" => at = Some(v.trim().parse().map_err(|_| bad("timestamp"))?),
                _ => {}
            }
        }
        match (model, temperature, hash, at) {
            (Some(model), Some(temperature), Some(prompt_sha256), Some(fetched_at)) => Ok(CacheMeta {
                model,
                temperature,
                prompt_sha256,
                fetched_at,
            }),
            _ => Err(Error::format(None, "cache metadata is incomplete")),
        }
    }
}

pub const META_FILE: &str = "meta.txt";

/// Directory of frozen descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionCache {
    dir: PathBuf,
}

pub fn cache_file_stem(class_name: &str) -> String {
    class_name
        .trim()
        .chars()
        .map(|c| {
            if c.is_whitespace() || c == '/' || c == '\\' {
                '_'
            } else {
                c
            }
        })
        .collect()
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = path.as_os_str().to_owned();
    static SEQ: AtomicU64 = AtomicU64::new(0);
    tmp.push(format!(
        ".tmp{}-{}",
        std::process::id(),
        SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(dir, e))
}

impl DescriptionCache {
    /// Open (creating if needed) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(DescriptionCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, class_name: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", cache_file_stem(class_name)))
    }

    pub fn get(&self, class_name: &str) -> Result<Option<String>> {
        let p = self.path_for(class_name);
        match fs::read(&p) {
            Ok(bytes) => String::from_utf8(bytes)
                .map(|s| Some(s.trim_end().to_string()))
                .map_err(|_| Error::format(None, "description is not UTF-8").at_path(&p)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&p, e)),
        }
    }

    pub fn put(&self, class_name: &str, text: &str) -> Result<()> {
        let mut body = text.trim().to_string();
        body.push('\n');
        write_atomic(&self.path_for(class_name), body.as_bytes())
    }

    pub fn meta(&self) -> Result<Option<CacheMeta>> {
        let p = self.dir.join(META_FILE);
        match fs::read_to_string(&p) {
            Ok(s) => CacheMeta::parse(&s).map(Some).map_err(|e| e.at_path(&p)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&p, e)),
        }
    }

    pub fn write_meta(&self, meta: &CacheMeta) -> Result<()> {
        write_atomic(&self.dir.join(META_FILE), meta.to_text().as_bytes())
    }

    /// Every missing class from `names`.
    pub fn missing<'a>(&self, names: &'a [String]) -> Result<Vec<&'a str>> {
        let mut out = Vec::new();
        for n in names {
            if self.get(n)?.is_none() {
                out.push(n.as_str());
            }
        }
        Ok(out)
    }
}

/// Sends one prompt, returns the completion text.
pub trait Completion: Sync {
    fn complete(&self, endpoint: &EndpointConfig, api_key: &str, prompt: &str) -> Result<String>;
}

/// Chat-completion request over HTTP.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpCompletion;

pub fn request_body(endpoint: &EndpointConfig, prompt: &str) -> String {
    serde_json::json!({
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
    })
    .to_string()
}

/// `choices[0].message.content` of a chat-completion response.
pub fn parse_completion(body: &str) -> Result<String> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| Error::Provider(format!("response is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| Error::Provider("response has no choices[0].message.content".into()))?;
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Provider("empty completion".into()));
    }
    Ok(text.to_string())
}

impl Completion for HttpCompletion {
    fn complete(&self, endpoint: &EndpointConfig, api_key: &str, prompt: &str) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent
            .post(&endpoint.url)
            .header("Authorization", &format!("Bearer {api_key}"))
            .header("Content-Type", "application/json")
            .send(request_body(endpoint, prompt).as_str())
            .map_err(|e| Error::Transport(format!("{}: {e}", endpoint.url)))?;
        let status = resp.status();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(format!("reading response: {e}")))?;
        if !status.is_success() {
            let snippet: String = body.chars().take(200).collect();
            return Err(Error::Transport(format!(
                "{} returned {status}: {snippet}",
                endpoint.url
            )));
        }
        parse_completion(&body)
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Cached description, or one fetch on a miss. `endpoint = None` is offline
/// mode: any miss is an error and nothing touches the network.
pub fn fetch_description(
    class_name: &str,
    cache: &DescriptionCache,
    endpoint: Option<&EndpointConfig>,
    client: &dyn Completion,
) -> Result<String> {
    let prompt = build_prompt(class_name)?;
    if let Some(text) = cache.get(class_name)? {
        return Ok(text);
    }
    let endpoint = endpoint.ok_or_else(|| {
        Error::Transport(format!(
            "no cached description for {class_name:?} and no endpoint configured (offline)"
        ))
    })?;
    let key = std::env::var(&endpoint.api_key_env)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::Transport(format!("environment variable {} is not set", endpoint.api_key_env)))?;
    let text = client.complete(endpoint, &key, &prompt)?;
    if text.trim().is_empty() {
        return Err(Error::Provider(format!("empty completion for {class_name:?}")));
    }
    cache.put(class_name, &text)?;
    cache.write_meta(&CacheMeta {
        model: endpoint.model.clone(),
        temperature: endpoint.temperature,
        prompt_sha256: prompt_hash(),
        fetched_at: now(),
    })?;
    Ok(text.trim().to_string())
}

/// Fetch descriptions for many classes with up to `workers` concurrent
/// requests. Results are in input order.
pub fn fetch_all(
    names: &[String],
    cache: &DescriptionCache,
    endpoint: Option<&EndpointConfig>,
    client: &dyn Completion,
    workers: usize,
) -> Result<Vec<String>> {
    let workers = workers.max(1);
    let mut out: Vec<Option<Result<String>>> = (0..names.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (chunk_names, chunk_out) in names
            .chunks(names.len().div_ceil(workers).max(1))
            .zip(out.chunks_mut(names.len().div_ceil(workers).max(1)))
        {
            s.spawn(move || {
                for (n, slot) in chunk_names.iter().zip(chunk_out) {
                    *slot = Some(fetch_description(n, cache, endpoint, client));
                }
            });
        }
    });
    out.into_iter()
        .map(|r| r.unwrap_or_else(|| Err(Error::contract("fetch worker did not run"))))
        .collect()
}
