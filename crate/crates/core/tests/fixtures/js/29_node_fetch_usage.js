const fetch = require('node-fetch');
const axios = require('axios').default;
async function report(data) {
  const res = await fetch('https://telemetry.example.test/v1', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(data),
  });
  if (!res.ok) throw new Error('HTTP ' + res.status);
  const { data: cfg } = await axios.get('https://config.example.test/cfg.json', { timeout: 5000 });
  return cfg;
}
module.exports = { report };
