/** Browser entry point: session identity comes from the query string,
 * e.g. /?annotator=team-a-3&team=team-a
 */

import { createApp } from './app.js';

const params = new URLSearchParams(window.location.search);
const annotatorId = params.get('annotator');
const teamId = params.get('team') ?? undefined;
const root = document.getElementById('app');

if (!root) {
  throw new Error('missing #app container');
}

if (!annotatorId) {
  root.textContent = 'Add ?annotator=YOUR_ID (and optionally &team=TEAM_ID) to the URL.';
} else {
  void createApp({ root, annotatorId, teamId, allowBack: params.get('back') === '1' }).start();
}
