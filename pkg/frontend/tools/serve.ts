// Dev server: static files for the console plus a pass-through proxy to the
// meeting service so the browser talks to one origin.
//
//   THINKTANK_URL=http://127.0.0.1:8700 WEB_PORT=8780 npm run serve

import { createServer, request as httpRequest } from 'node:http';
import { readFile } from 'node:fs/promises';
import { extname, join, normalize } from 'node:path';
import { fileURLToPath } from 'node:url';

const root = fileURLToPath(new URL('../..', import.meta.url));
const serviceUrl = new URL(process.env.THINKTANK_URL ?? 'http://127.0.0.1:8700');
const port = Number(process.env.WEB_PORT ?? 8780);

const MIME: Record<string, string> = {
  '.html': 'text/html; charset=utf-8',
  '.js': 'text/javascript; charset=utf-8',
  '.css': 'text/css; charset=utf-8',
  '.json': 'application/json',
};

const API_PREFIXES = ['/projects', '/meetings', '/experts', '/health'];

const server = createServer(async (req, res) => {
  const url = req.url ?? '/';
  if (API_PREFIXES.some((p) => url.startsWith(p))) {
    const upstream = httpRequest(
      {
        hostname: serviceUrl.hostname,
        port: serviceUrl.port,
        path: url,
        method: req.method,
        headers: { ...req.headers, host: serviceUrl.host },
      },
      (upstreamRes) => {
        res.writeHead(upstreamRes.statusCode ?? 502, upstreamRes.headers);
        upstreamRes.pipe(res); // stream SSE frames through unbuffered
      },
    );
    upstream.on('error', () => {
      res.writeHead(502, { 'content-type': 'application/json' });
      res.end(JSON.stringify({ error: { kind: 'gateway', message: 'meeting service unreachable' } }));
    });
    req.pipe(upstream);
    return;
  }

  const relative = url === '/' ? '/index.html' : url.split('?')[0] ?? '/index.html';
  const path = normalize(join(root, relative));
  if (!path.startsWith(normalize(root))) {
    res.writeHead(403).end();
    return;
  }
  try {
    const body = await readFile(path);
    res.writeHead(200, { 'content-type': MIME[extname(path)] ?? 'application/octet-stream' });
    res.end(body);
  } catch {
    res.writeHead(404, { 'content-type': 'text/plain' });
    res.end('not found');
  }
});

server.listen(port, '127.0.0.1', () => {
  console.log(`console on http://127.0.0.1:${port} -> service ${serviceUrl.href}`);
});
