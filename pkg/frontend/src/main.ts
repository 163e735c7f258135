import { ApiClient } from './api.js';
import { ChatWidget } from './widget.js';

const root = document.getElementById('votebot');
if (root) {
  const widget = new ChatWidget(root, new ApiClient(''));
  void widget.start();
}
