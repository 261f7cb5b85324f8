//! Tool calls, their argument schemas, and the errors environments return.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Pseudo-tool that ends the current day. Handled by the episode, never by an
/// environment.
pub const TASK_DONE: &str = "task_done";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCall {
    pub tool: String,
    #[serde(default = "empty_object")]
    pub args: Value,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl ActionCall {
    pub fn new(tool: impl Into<String>, args: Value) -> Self {
        Self {
            tool: tool.into(),
            args,
        }
    }

    pub fn bare(tool: impl Into<String>) -> Self {
        Self::new(tool, empty_object())
    }

    pub fn task_done() -> Self {
        Self::bare(TASK_DONE)
    }

    pub fn is_task_done(&self) -> bool {
        self.tool == TASK_DONE
    }
}

/// Failure of a single action. `code` is the stable machine-readable part.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct ActionError {
    pub code: String,
    pub message: String,
}

impl ActionError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": self.code, "message": self.message })
    }
}

pub mod codes {
    pub const UNKNOWN_TOOL: &str = "unknown_tool";
    pub const SCHEMA_VIOLATION: &str = "schema_violation";
    pub const BUDGET_EXHAUSTED: &str = "budget_exhausted";
    pub const TERMINATED: &str = "terminated";
    pub const QUERY_REQUIRED: &str = "query_required";
    pub const UNKNOWN_PRODUCT: &str = "unknown_product";
    pub const INVALID_QUANTITY: &str = "invalid_quantity";
    pub const INSUFFICIENT_FUNDS: &str = "insufficient_funds";
    pub const INVALID_PRICE: &str = "invalid_price";
    pub const UNKNOWN_TASK: &str = "unknown_task";
    pub const FREE_EXHAUSTED: &str = "free_exhausted";
    pub const INSUFFICIENT_ENERGY: &str = "insufficient_energy";
    pub const INVALID_ARGUMENT: &str = "invalid_argument";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgType {
    String,
    Number,
    Integer,
    /// String restricted to a fixed set of values.
    Enum(&'static [&'static str]),
    /// Array of objects with the given fields, all required.
    ObjectList(&'static [(&'static str, ArgType)]),
}

impl ArgType {
    fn check(&self, v: &Value) -> Result<(), String> {
        match (self, v) {
            (ArgType::String, Value::String(_)) => Ok(()),
            (ArgType::Number, Value::Number(_)) => Ok(()),
            (ArgType::Integer, Value::Number(n)) if n.is_i64() || n.is_u64() => Ok(()),
            (ArgType::Enum(allowed), Value::String(s)) => {
                if allowed.contains(&s.as_str()) {
                    Ok(())
                } else {
                    Err(format!("expected one of {allowed:?}, got {s:?}"))
                }
            }
            (ArgType::ObjectList(fields), Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let obj = item
                        .as_object()
                        .ok_or_else(|| format!("item {i} is not an object"))?;
                    check_fields(fields, obj).map_err(|e| format!("item {i}: {e}"))?;
                }
                Ok(())
            }
            (t, v) => Err(format!("expected {}, got {}", t.name(), json_type(v))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            ArgType::String | ArgType::Enum(_) => "string",
            ArgType::Number => "number",
            ArgType::Integer => "integer",
            ArgType::ObjectList(_) => "array",
        }
    }

    fn json_schema(&self) -> Value {
        match self {
            ArgType::String => json!({"type": "string"}),
            ArgType::Number => json!({"type": "number"}),
            ArgType::Integer => json!({"type": "integer"}),
            ArgType::Enum(vals) => json!({"type": "string", "enum": vals}),
            ArgType::ObjectList(fields) => json!({
                "type": "array",
                "items": object_schema(fields),
            }),
        }
    }
}

fn json_type(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn check_fields(fields: &[(&'static str, ArgType)], obj: &Map<String, Value>) -> Result<(), String> {
    for (name, ty) in fields {
        let v = obj
            .get(*name)
            .ok_or_else(|| format!("missing required field `{name}`"))?;
        ty.check(v).map_err(|e| format!("field `{name}`: {e}"))?;
    }
    if let Some(extra) = obj.keys().find(|k| !fields.iter().any(|(n, _)| n == k)) {
        return Err(format!("unexpected field `{extra}`"));
    }
    Ok(())
}

fn object_schema(fields: &[(&'static str, ArgType)]) -> Value {
    let props: Map<String, Value> = fields
        .iter()
        .map(|(n, t)| (n.to_string(), t.json_schema()))
        .collect();
    let required: Vec<&str> = fields.iter().map(|(n, _)| *n).collect();
    json!({
        "type": "object",
        "properties": props,
        "required": required,
        "additionalProperties": false,
    })
}

/// Name, description and argument schema of one environment tool.
#[derive(Debug, Clone, Copy)]
pub struct ToolSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [(&'static str, ArgType)],
}

impl ToolSpec {
    /// Strict check: args must be an object with exactly the declared fields
    /// and the declared types.
    pub fn validate(&self, args: &Value) -> Result<(), ActionError> {
        let obj = match args {
            Value::Object(o) => o,
            Value::Null if self.params.is_empty() => return Ok(()),
            other => {
                return Err(ActionError::new(
                    codes::SCHEMA_VIOLATION,
                    format!("{}: arguments must be a JSON object, got {}", self.name, json_type(other)),
                ))
            }
        };
        check_fields(self.params, obj)
            .map_err(|e| ActionError::new(codes::SCHEMA_VIOLATION, format!("{}: {e}", self.name)))
    }

    /// Function-calling style declaration of the tool.
    pub fn json_schema(&self) -> Value {
        json!({
            "name": self.name,
            "description": self.description,
            "parameters": object_schema(self.params),
        })
    }
}

pub fn find_tool<'a>(tools: &'a [ToolSpec], name: &str) -> Result<&'a ToolSpec, ActionError> {
    tools
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| ActionError::new(codes::UNKNOWN_TOOL, format!("no tool named `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ITEM: &[(&str, ArgType)] = &[("name", ArgType::String), ("quantity", ArgType::Integer)];
    const SPEC: ToolSpec = ToolSpec {
        name: "order_place",
        description: "",
        params: &[("items", ArgType::ObjectList(ITEM))],
    };
    const PRICE: ToolSpec = ToolSpec {
        name: "price_set",
        description: "",
        params: &[("product_name", ArgType::String), ("price", ArgType::Number)],
    };

    #[test]
    fn accepts_well_formed() {
        SPEC.validate(&json!({"items": [{"name": "Cola Can", "quantity": 3}]}))
            .unwrap();
        PRICE.validate(&json!({"product_name": "x", "price": 1})).unwrap();
    }

    #[test]
    fn rejects_wrong_type_missing_and_extra() {
        let e = PRICE
            .validate(&json!({"product_name": "x", "price": "1.5"}))
            .unwrap_err();
        assert_eq!(e.code, codes::SCHEMA_VIOLATION);
        assert!(PRICE.validate(&json!({"product_name": "x"})).is_err());
        assert!(PRICE
            .validate(&json!({"product_name": "x", "price": 1.0, "note": 1}))
            .is_err());
        assert!(SPEC
            .validate(&json!({"items": [{"name": "a", "quantity": 1.5}]}))
            .is_err());
        assert!(PRICE.validate(&json!([1, 2])).is_err());
    }

    #[test]
    fn empty_params_accept_empty_object_or_null() {
        let t = ToolSpec {
            name: "tasks_browse",
            description: "",
            params: &[],
        };
        t.validate(&json!({})).unwrap();
        t.validate(&Value::Null).unwrap();
        assert!(t.validate(&json!({"x": 1})).is_err());
    }

    #[test]
    fn schema_export_lists_required() {
        let s = PRICE.json_schema();
        assert_eq!(s["parameters"]["required"], json!(["product_name", "price"]));
        assert_eq!(s["parameters"]["additionalProperties"], json!(false));
    }
}
