/** Browser bootstrap: session form, pane loaders, action buttons. */

import { EditorApp } from "./app.js";

function field(label: string, id: string, placeholder = ""): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "field";
  wrap.textContent = label;
  const input = document.createElement("input");
  input.id = id;
  input.placeholder = placeholder;
  wrap.appendChild(input);
  return wrap;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const btn = document.createElement("button");
  btn.textContent = label;
  btn.addEventListener("click", onClick);
  return btn;
}

function value(id: string): string {
  return (document.getElementById(id) as HTMLInputElement).value.trim();
}

function boot(): void {
  const rootEl = document.getElementById("app");
  if (!rootEl) return;
  const app = new EditorApp(rootEl);

  const bar = document.createElement("div");
  bar.className = "toolbar";
  bar.appendChild(field("store", "base-url", "http://127.0.0.1:8470"));
  bar.appendChild(field("token", "token", "bearer token (optional)"));
  bar.appendChild(field("user", "user-name", "display name"));
  bar.appendChild(
    button("connect", () =>
      app.connect(value("base-url"), value("token") || undefined, value("user") || "anonymous")
    )
  );
  bar.appendChild(field("left doc", "left-doc"));
  bar.appendChild(button("load left", () => void app.loadPane("left", value("left-doc"))));
  bar.appendChild(field("right doc", "right-doc"));
  bar.appendChild(button("load right", () => void app.loadPane("right", value("right-doc"))));
  bar.appendChild(field("left ctx", "left-ctx", "lang=de device=mobile"));
  bar.appendChild(
    button("apply ctx", () => {
      const entries: Record<string, string> = {};
      for (const pair of value("left-ctx").split(/\s+/).filter(Boolean)) {
        const [k, v] = pair.split("=", 2);
        if (k && v !== undefined) entries[k] = v;
      }
      void app.setPaneContext("left", entries);
    })
  );
  bar.appendChild(button("link selections", () => void app.linkSelections()));
  bar.appendChild(button("transclude", () => void app.transcludeSelection()));
  bar.appendChild(button("refresh", () => void app.refresh()));
  rootEl.prepend(bar);

  // snippet editing: double-click a span, edit its resource text
  rootEl.addEventListener("dblclick", (event) => {
    const span = (event.target as HTMLElement).closest<HTMLElement>(".text-span");
    const resource = span?.dataset.resource;
    if (!resource) return;
    const current = span?.textContent ?? "";
    const next = window.prompt("edit snippet", current);
    if (next !== null && next !== current) void app.editResource(resource, next);
  });
}

window.addEventListener("load", boot);
