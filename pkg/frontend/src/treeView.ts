/** Render a tree (and the consultation state) to HTML strings.
 *
 * Pure string builders so they are testable without a DOM.
 */

import type { Tree, TreeNode } from "./api.js";
import type { ConsultState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function childrenOf(tree: Tree, id: number): TreeNode[] {
  return tree.nodes
    .filter((n) => n.parent_id === id)
    .sort((a, b) => a.id - b.id);
}

/** Nested list of the whole tree; the active path is marked. */
export function renderTree(tree: Tree, activePath: number[] = []): string {
  const active = new Set(activePath);
  const root = tree.nodes.find((n) => n.parent_id === null);
  if (!root) return "<p>empty tree</p>";

  const renderNode = (node: TreeNode): string => {
    const cls = [
      `node-${node.kind}`,
      active.has(node.id) ? "active" : "",
      node.is_reference ? "reference" : "",
    ]
      .filter(Boolean)
      .join(" ");
    const label =
      node.edge_label !== null
        ? `<span class="edge-label">${escapeHtml(node.edge_label)}</span> `
        : "";
    const kids = childrenOf(tree, node.id);
    const sub =
      kids.length > 0
        ? `<ul>${kids.map((k) => `<li>${renderNode(k)}</li>`).join("")}</ul>`
        : "";
    return `<span class="${cls}" data-node-id="${node.id}">${label}${escapeHtml(node.text)}</span>${sub}`;
  };

  return `<ul class="tree"><li>${renderNode(root)}</li></ul>`;
}

export function renderMessages(state: ConsultState): string {
  return state.messages
    .map(
      (m) =>
        `<div class="msg msg-${m.role}"><span class="who">${
          m.role === "patient" ? "You" : "Guide"
        }</span>${escapeHtml(m.text)}</div>`,
    )
    .join("");
}

export function renderHypotheses(state: ConsultState): string {
  if (!state.hypotheses) return "";
  const items = state.hypotheses.candidates
    .map((c) => `<li>${escapeHtml(c)}</li>`)
    .join("");
  return (
    `<div class="hypotheses"><h3>Possible outcomes</h3><ul>${items}</ul>` +
    `<details><summary>Decision subtree</summary><pre>${escapeHtml(
      state.hypotheses.ieet,
    )}</pre></details></div>`
  );
}

export function renderDiagnosis(state: ConsultState): string {
  if (!state.diagnosis) return "";
  return `<div class="diagnosis"><h3>Recommendation</h3><p>${escapeHtml(
    state.diagnosis.text,
  )}</p></div>`;
}

export function renderQuickReplies(labels: string[]): string {
  return labels
    .map(
      (l) =>
        `<button class="quick-reply" data-label="${escapeHtml(l)}">${escapeHtml(l)}</button>`,
    )
    .join("");
}
