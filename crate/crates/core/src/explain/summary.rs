use serde::Serialize;

use super::{ContrastTriple, ImportanceProfile, RelationGraph};

/// Values that fill the summary template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummarySlots {
    pub query_id: String,
    pub pred_label: String,
    pub gold_label: String,
    pub correct: bool,
    pub closest_id: String,
    /// Indices of the (at most two) tokens with the largest stacked importance.
    pub top_tokens: Vec<usize>,
    pub contrast_label: String,
    pub contrast_id: String,
    /// Indices of tokens whose contribution to both similarities exceeds the
    /// mean contribution of that pair.
    pub confounders: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub text: String,
    pub slots: SummarySlots,
}

fn quoted(tokens: &[String], idx: &[usize]) -> String {
    let words: Vec<String> = idx.iter().map(|&i| format!("\"{}\"", tokens[i])).collect();
    match words.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn above_mean(values: &[f64]) -> impl Fn(usize) -> bool + '_ {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    move |i| values[i] > mean
}

pub fn summarize(triple: &ContrastTriple, graph: &RelationGraph, profile: &ImportanceProfile) -> Summary {
    let tokens = &profile.tokens;
    let totals = profile.totals();
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    order.truncate(2);

    let closest = above_mean(&graph.closest.query);
    let contrast = above_mean(&graph.contrast.query);
    let confounders: Vec<usize> = (0..graph.closest.query.len()).filter(|&i| closest(i) && contrast(i)).collect();

    let slots = SummarySlots {
        query_id: triple.query_id.clone(),
        pred_label: triple.query_pred_label.clone(),
        gold_label: triple.query_gold_label.clone(),
        correct: triple.query_pred_label == triple.query_gold_label,
        closest_id: triple.closest_id.clone(),
        top_tokens: order,
        contrast_label: triple.contrast_label.clone(),
        contrast_id: triple.contrast_id.clone(),
        confounders,
    };

    let mut text = format!("Sample {} was predicted as \"{}\"", slots.query_id, slots.pred_label);
    if slots.correct {
        text.push_str(", which matches its gold label.");
    } else {
        text.push_str(&format!(", but its gold label is \"{}\".", slots.gold_label));
    }
    text.push_str(&format!(
        " The nearest sample with the same prediction is {}.",
        slots.closest_id
    ));
    if !slots.top_tokens.is_empty() {
        let noun = if slots.top_tokens.len() == 1 { "token is" } else { "tokens are" };
        text.push_str(&format!(
            " The most important {noun} {}.",
            quoted(tokens, &slots.top_tokens)
        ));
    }
    text.push_str(&format!(
        " For contrast, the nearest \"{}\" sample is {}.",
        slots.contrast_label, slots.contrast_id
    ));
    if !slots.confounders.is_empty() {
        let verb = if slots.confounders.len() == 1 { "contributes" } else { "contribute" };
        text.push_str(&format!(
            " {} {verb} strongly to the similarity with both \"{}\" and \"{}\" and may confound the prediction.",
            quoted(tokens, &slots.confounders),
            slots.pred_label,
            slots.contrast_label
        ));
    }
    Summary { text, slots }
}
