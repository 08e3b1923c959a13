import { ApiClient } from './api.js';
import { createApp } from './ui.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}
createApp(root, new ApiClient(''), window.localStorage);
