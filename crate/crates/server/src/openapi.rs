//! Machine-readable description of the API.

use landscape_core::api::ERROR_CODES;
use serde_json::{json, Map, Value};

/// Method and path of every documented route.
pub const ROUTES: [(&str, &str); 10] = [
    ("get", "/api/datasets"),
    ("get", "/api/datasets/{id}/points"),
    ("get", "/api/datasets/{id}/local-words"),
    ("get", "/api/datasets/{id}/lists"),
    ("get", "/api/datasets/{id}/confusions"),
    ("get", "/api/datasets/{id}/label-clusters"),
    ("get", "/api/datasets/{id}/hulls"),
    ("get", "/api/datasets/{id}/samples/{sid}/explanation"),
    ("post", "/api/compare"),
    ("post", "/api/admin/datasets"),
];

fn r(name: &str) -> Value {
    json!({ "$ref": format!("#/components/schemas/{name}") })
}

fn string() -> Value {
    json!({ "type": "string" })
}

fn int() -> Value {
    json!({ "type": "integer", "minimum": 0 })
}

fn number() -> Value {
    json!({ "type": "number" })
}

fn array(items: Value) -> Value {
    json!({ "type": "array", "items": items })
}

fn strings() -> Value {
    array(string())
}

fn numbers() -> Value {
    array(number())
}

fn one_of(values: &[&str]) -> Value {
    json!({ "type": "string", "enum": values })
}

fn nullable(v: Value) -> Value {
    json!({ "anyOf": [v, { "type": "null" }] })
}

/// Closed object: every listed property is required unless named in
/// `optional`.
fn object(props: &[(&str, Value)], optional: &[&str]) -> Value {
    let mut properties = Map::new();
    let mut required = Vec::new();
    for (name, schema) in props {
        properties.insert(name.to_string(), schema.clone());
        if !optional.contains(name) {
            required.push(Value::from(*name));
        }
    }
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false,
    })
}

fn schemas() -> Value {
    let region = json!({
        "type": "array",
        "items": { "type": "number" },
        "description": "Flat coordinates: empty for everything, x1,y1,x2,y2 for a rectangle, three or more points for a lasso polygon (even-odd rule)."
    });
    let shares = array(object(&[("label", string()), ("count", int()), ("share", number())], &[]));
    let ranked = array(r("RankedItem"));
    let contributions = object(&[("query", numbers()), ("other", numbers()), ("cosine", number())], &[]);
    let column = object(
        &[
            ("role", one_of(&["query", "closest", "contrast"])),
            ("sample_id", string()),
            ("gold_label", string()),
            ("pred_label", string()),
            ("tokens", strings()),
        ],
        &[],
    );
    let side = object(
        &[
            ("selector", r("GroupSelector")),
            ("dataset", string()),
            ("layout_id", string()),
            ("sample_count", int()),
            ("points", array(object(&[("id", string()), ("x", number()), ("y", number())], &[]))),
        ],
        &[],
    );
    let error_codes: Vec<&str> = ERROR_CODES.iter().map(|(c, _)| *c).collect();
    let sort = one_of(&["freq", "gold", "pred"]);

    json!({
        "Error": object(&[("error", object(&[("code", one_of(&error_codes)), ("message", string())], &[]))], &[]),
        "DatasetInfo": object(&[
            ("id", string()), ("sample_count", int()), ("label_count", int()), ("dim", int()),
            ("layout_id", string()), ("method", one_of(&["pca", "tsne"])), ("seed", int()), ("warning", string()),
        ], &["warning"]),
        "DatasetList": array(r("DatasetInfo")),
        "Points": object(&[
            ("dataset", string()), ("layout_id", string()), ("count", int()),
            ("points", array(object(&[
                ("index", int()), ("id", string()), ("x", number()), ("y", number()),
                ("gold_label", string()), ("pred_label", string()), ("confidence", number()),
                ("error", json!({ "type": "boolean" })), ("cluster", nullable(int())),
            ], &[]))),
        ], &[]),
        "LocalWords": object(&[
            ("dataset", string()), ("layout_id", string()),
            ("mode", one_of(&["words", "concepts"])), ("space", one_of(&["layout", "embedding"])),
            ("freq", int()), ("locality", number()), ("quantile", number()),
            ("stopwords", one_of(&["keep", "ignore"])), ("sample_count", int()),
            ("words", array(object(&[
                ("word", string()), ("x", number()), ("y", number()), ("frequency", int()),
                ("locality", number()), ("scale_hint", number()),
            ], &[]))),
        ], &[]),
        "RankedItem": object(&[("item", string()), ("count", int()), ("share", number())], &[]),
        "Lists": object(&[
            ("dataset", string()), ("sample_count", int()), ("words", ranked.clone()),
            ("concepts", ranked.clone()), ("gold_labels", ranked.clone()), ("pred_labels", ranked),
        ], &[]),
        "Confusions": object(&[
            ("dataset", string()), ("sort", sort.clone()), ("secondary", nullable(sort)), ("total_errors", int()),
            ("entries", array(object(&[
                ("gold", string()), ("pred", string()), ("frequency", int()), ("sample_ids", strings()),
            ], &[]))),
            ("error_shares", object(&[
                ("total_errors", int()), ("false_negatives", shares.clone()), ("false_positives", shares),
            ], &[])),
        ], &[]),
        "LabelClusters": object(&[
            ("dataset", string()), ("cut", number()),
            ("clusters", array(object(&[
                ("id", int()), ("members", strings()), ("color_index", int()), ("color", string()),
            ], &[]))),
        ], &[]),
        "Hulls": object(&[
            ("dataset", string()), ("layout_id", string()), ("field", one_of(&["gold", "pred"])),
            ("hulls", array(object(&[
                ("label", string()), ("count", int()),
                ("vertices", array(json!({ "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 }))),
            ], &[]))),
        ], &[]),
        "Explanation": object(&[
            ("dataset", string()), ("sample_id", string()), ("metrics", strings()),
            ("importance", object(&[
                ("sample_id", string()), ("tokens", strings()),
                ("metrics", array(object(&[("metric", string()), ("scores", numbers())], &[]))),
            ], &[])),
            ("triple", object(&[
                ("query_id", string()), ("query_pred_label", string()), ("query_gold_label", string()),
                ("closest_id", string()), ("contrast_id", string()), ("contrast_label", string()),
            ], &[])),
            ("graph", object(&[
                ("columns", json!({ "type": "array", "items": column, "minItems": 3, "maxItems": 3 })),
                ("tau", number()),
                ("edges", array(object(&[
                    ("target", one_of(&["closest", "contrast"])), ("query_token", int()),
                    ("other_token", int()), ("weight", number()),
                ], &[]))),
                ("closest", contributions.clone()),
                ("contrast", contributions),
            ], &[])),
            ("summary", object(&[
                ("text", string()),
                ("slots", object(&[
                    ("query_id", string()), ("pred_label", string()), ("gold_label", string()),
                    ("correct", json!({ "type": "boolean" })), ("closest_id", string()),
                    ("top_tokens", array(int())), ("contrast_label", string()), ("contrast_id", string()),
                    ("confounders", array(int())),
                ], &[])),
            ], &[])),
        ], &[]),
        "GroupSelector": object(&[
            ("dataset", string()), ("gold_labels", strings()), ("pred_labels", strings()),
            ("region", region), ("errors", json!({ "type": "boolean" })),
            ("confidence", json!({ "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 })),
        ], &["dataset", "gold_labels", "pred_labels", "region", "errors", "confidence"]),
        "CompareRequest": object(&[
            ("dataset", string()), ("side_a", r("GroupSelector")), ("side_b", r("GroupSelector")),
            ("item_kind", r("ItemKind")), ("stopwords", one_of(&["keep", "ignore"])),
        ], &["dataset", "item_kind", "stopwords"]),
        "ItemKind": one_of(&["words", "concepts", "labels", "pred_labels"]),
        "Comparison": object(&[
            ("item_kind", r("ItemKind")), ("stopwords", one_of(&["keep", "ignore"])), ("z_crit", number()),
            ("side_a", side.clone()), ("side_b", side),
            ("items", array(object(&[
                ("item", string()), ("kind", r("ItemKind")), ("count_a", int()), ("count_b", int()),
                ("z", number()), ("verdict", one_of(&["shared", "a_side", "b_side"])),
            ], &[]))),
        ], &[]),
        "Manifest": object(&[
            ("id", string()), ("corpus", string()), ("sample_embeddings", string()),
            ("token_embeddings", string()), ("lexicon", string()), ("importance", string()),
            ("stopwords", string()),
            ("projection", object(&[
                ("method", one_of(&["pca", "tsne"])), ("perplexity", number()), ("iterations", int()),
                ("early_exaggeration", number()), ("exaggeration_iterations", int()),
                ("learning_rate", number()), ("pca_dims", nullable(int())),
            ], &["method", "perplexity", "iterations", "early_exaggeration", "exaggeration_iterations", "learning_rate", "pca_dims"])),
            ("seed", int()),
        ], &["sample_embeddings", "lexicon", "importance", "stopwords", "projection", "seed"]),
    })
}

struct P {
    name: &'static str,
    schema: Value,
    description: &'static str,
}

fn p(name: &'static str, schema: Value, description: &'static str) -> P {
    P {
        name,
        schema,
        description,
    }
}

fn query_params(list: Vec<P>) -> Vec<Value> {
    list.into_iter()
        .map(|p| {
            json!({ "name": p.name, "in": "query", "required": false, "schema": p.schema, "description": p.description })
        })
        .collect()
}

fn path_param(name: &str) -> Value {
    json!({ "name": name, "in": "path", "required": true, "schema": { "type": "string" } })
}

fn filter_params() -> Vec<P> {
    vec![
        p("errors_only", json!({ "type": "boolean" }), "Keep only misclassified samples."),
        p("conf_lo", number(), "Lower confidence bound (inclusive)."),
        p("conf_hi", number(), "Upper confidence bound (inclusive)."),
        p("labels", string(), "Comma-separated label ids."),
        p("label_field", one_of(&["gold", "pred", "either"]), "Label field the labels filter applies to (default either)."),
        p("region", string(), "Flat comma-separated polygon or rectangle coordinates in layout space."),
    ]
}

fn responses(ok: &str, schema: &str, codes: &[&str]) -> Value {
    let mut out = Map::new();
    out.insert(
        ok.to_string(),
        json!({ "description": "Success", "content": { "application/json": { "schema": r(schema) } } }),
    );
    let mut by_status: std::collections::BTreeMap<u16, Vec<&str>> = Default::default();
    for code in codes {
        let status = ERROR_CODES.iter().find(|(c, _)| c == code).expect("known code").1;
        by_status.entry(status).or_default().push(code);
    }
    for (status, codes) in by_status {
        out.insert(
            status.to_string(),
            json!({
                "description": format!("Error codes: {}", codes.join(", ")),
                "content": { "application/json": { "schema": r("Error") } },
                "x-error-codes": codes,
            }),
        );
    }
    Value::Object(out)
}

fn get_op(summary: &str, path: &[&str], query: Vec<P>, schema: &str, codes: &[&str]) -> Value {
    let mut params: Vec<Value> = path.iter().map(|n| path_param(n)).collect();
    params.extend(query_params(query));
    json!({ "get": { "summary": summary, "parameters": params, "responses": responses("200", schema, codes) } })
}

fn post_op(summary: &str, body: &str, ok: &str, schema: &str, codes: &[&str]) -> Value {
    json!({ "post": {
        "summary": summary,
        "requestBody": { "required": true, "content": { "application/json": { "schema": r(body) } } },
        "responses": responses(ok, schema, codes),
    } })
}

/// OpenAPI 3.1 document covering every route, parameter and payload.
pub fn openapi_document() -> Value {
    let ds = ["dataset_not_found", "invalid_parameter"];
    let filtered = ["dataset_not_found", "invalid_parameter", "invalid_region", "unknown_label"];
    let mut local_words = filter_params();
    local_words.extend([
        p("freq", int(), "Frequency threshold: words need more occurrences than this (default 20)."),
        p("locality", number(), "Largest accepted normalized locality (default 0.5)."),
        p("quantile", number(), "Distance quantile defining locality, in (0, 1] (default 0.8)."),
        p("mode", one_of(&["words", "concepts"]), "Words, or concepts derived from local words via the lexicon."),
        p("stopwords", one_of(&["keep", "ignore"]), "Whether stopwords may be emitted."),
        p("space", one_of(&["layout", "embedding"]), "Space locality is measured in (default layout)."),
        p("concept_freq", int(), "Concept-stage frequency threshold (default: freq)."),
        p("concept_locality", number(), "Concept-stage locality bound (default: locality)."),
    ]);
    let mut lists = filter_params();
    lists.extend([
        p("stopwords", one_of(&["keep", "ignore"]), "Whether stopwords are counted."),
        p("limit", int(), "Maximum rows per list."),
    ]);
    let sort = one_of(&["freq", "gold", "pred"]);

    let paths = json!({
        "/api/datasets": get_op("Loaded datasets", &[], vec![], "DatasetList", &["invalid_parameter"]),
        "/api/datasets/{id}/points": get_op("Projected sample positions", &["id"], filter_params(), "Points", &filtered),
        "/api/datasets/{id}/local-words": get_op("Localized words or concepts", &["id"], local_words, "LocalWords", &filtered),
        "/api/datasets/{id}/lists": get_op("Ranked words, concepts and labels with shares", &["id"], lists, "Lists", &filtered),
        "/api/datasets/{id}/confusions": get_op("Confusion table and error shares", &["id"], vec![
            p("sort", sort.clone(), "Primary key; frequency sorts descending."),
            p("secondary", sort, "Key applied within equal primary keys."),
            p("conf_lo", number(), "Lower confidence bound (inclusive)."),
            p("conf_hi", number(), "Upper confidence bound (inclusive)."),
        ], "Confusions", &ds),
        "/api/datasets/{id}/label-clusters": get_op("Label clusters by prototype similarity", &["id"], vec![
            p("cut", number(), "Average-linkage cosine distance cut in (0, 2) (default 0.5)."),
        ], "LabelClusters", &ds),
        "/api/datasets/{id}/hulls": get_op("Convex hulls per label", &["id"], vec![
            p("labels", string(), "Comma-separated label ids (default all)."),
            p("field", one_of(&["gold", "pred"]), "Label field grouping the points (default gold)."),
        ], "Hulls", &["dataset_not_found", "invalid_parameter", "unknown_label"]),
        "/api/datasets/{id}/samples/{sid}/explanation": get_op("Sample-level explanation", &["id", "sid"], vec![
            p("contrast_label", string(), "Label to contrast with (default chosen from errors and confusions)."),
            p("tau", number(), "Smallest token cosine kept as a relation edge (default 0.4)."),
            p("metrics", string(), "Comma-separated importance metrics in stacking order."),
        ], "Explanation", &[
            "dataset_not_found", "sample_not_found", "invalid_parameter", "unknown_metric",
            "unknown_label", "no_candidate", "degenerate_sample",
        ]),
        "/api/compare": post_op("Compare two sample groups", "CompareRequest", "200", "Comparison", &[
            "dataset_not_found", "invalid_body", "invalid_parameter", "invalid_region", "unknown_label", "empty_group",
        ]),
        "/api/admin/datasets": post_op("Load a dataset from a manifest", "Manifest", "201", "DatasetInfo", &[
            "invalid_body", "dataset_exists", "load_failed",
        ]),
    });
    json!({
        "openapi": "3.1.0",
        "info": {
            "title": "landscape analytics API",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Read-only analytics over loaded text-classification datasets. Floats carry 9 significant digits. Unknown routes under /api return route_not_found.",
        },
        "paths": paths,
        "components": { "schemas": schemas() },
    })
}
