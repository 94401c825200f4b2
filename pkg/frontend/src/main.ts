import { ApiClient } from "./api.js";
import { ConsultApp, type UiElements } from "./ui.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const elements: UiElements = {
  complaintForm: byId("complaint-form"),
  complaintInput: byId("complaint-input"),
  treeSelect: byId("tree-select"),
  chat: byId("chat"),
  replyForm: byId("reply-form"),
  replyInput: byId("reply-input"),
  quickReplies: byId("quick-replies"),
  panel: byId("panel"),
  treePane: byId("tree-pane"),
  status: byId("status"),
};

const app = new ConsultApp(new ApiClient(""), elements);
void app.init();
