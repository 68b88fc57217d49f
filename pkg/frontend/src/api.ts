import type { DetectPayload, TablesPayload } from "./types.js";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function parseError(response: Response): Promise<never> {
  let message = `request failed (${response.status})`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") {
      message = body.error;
    }
  } catch {
    // non-JSON error body; keep the status message
  }
  throw new ApiError(response.status, message);
}

export async function fetchTables(base = ""): Promise<TablesPayload> {
  const response = await fetch(`${base}/tables`);
  if (!response.ok) {
    await parseError(response);
  }
  return (await response.json()) as TablesPayload;
}

export async function detect(
  tableId: string,
  question: string,
  base = "",
): Promise<DetectPayload> {
  const response = await fetch(`${base}/detect`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ table_id: tableId, question }),
  });
  if (!response.ok) {
    await parseError(response);
  }
  return (await response.json()) as DetectPayload;
}
