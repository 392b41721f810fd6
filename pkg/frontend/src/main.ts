import { ApiClient } from "./api.js";
import { mount } from "./app.js";

// Browser entry point. Same-origin /api requests; the dev server proxies
// them to the service port.
void mount(document, { api: new ApiClient("") });
